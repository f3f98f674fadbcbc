#include "crossview/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace crossview::training {

namespace {

struct F1Breakdown {
    std::vector<double> per_class_f1;
    std::vector<int> support;
};

F1Breakdown f1_breakdown(const std::vector<int>& predictions, const std::vector<int>& truths) {
    if (predictions.empty() || predictions.size() != truths.size())
        throw std::invalid_argument("f1: empty or mismatched inputs");
    int classes = 0;
    for (std::size_t i = 0; i < truths.size(); ++i)
        classes = std::max({classes, truths[i] + 1, predictions[i] + 1});
    std::vector<int> tp(static_cast<std::size_t>(classes), 0);
    std::vector<int> fp(static_cast<std::size_t>(classes), 0);
    std::vector<int> fn(static_cast<std::size_t>(classes), 0);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (predictions[i] == truths[i]) {
            tp[static_cast<std::size_t>(truths[i])]++;
        } else {
            fp[static_cast<std::size_t>(predictions[i])]++;
            fn[static_cast<std::size_t>(truths[i])]++;
        }
    }
    F1Breakdown out;
    out.per_class_f1.resize(static_cast<std::size_t>(classes), 0.0);
    out.support.resize(static_cast<std::size_t>(classes), 0);
    for (int c = 0; c < classes; ++c) {
        const auto u = static_cast<std::size_t>(c);
        out.support[u] = tp[u] + fn[u];
        const double denom = 2.0 * tp[u] + fp[u] + fn[u];
        out.per_class_f1[u] = denom > 0.0 ? 2.0 * tp[u] / denom : 0.0;
    }
    return out;
}

}  // namespace

double weighted_f1(const std::vector<int>& predictions, const std::vector<int>& truths) {
    const F1Breakdown b = f1_breakdown(predictions, truths);
    double num = 0.0;
    long total = 0;
    for (std::size_t c = 0; c < b.per_class_f1.size(); ++c) {
        if (b.support[c] == 0) continue;
        num += b.per_class_f1[c] * b.support[c];
        total += b.support[c];
    }
    return total > 0 ? num / static_cast<double>(total) : 0.0;
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& truths) {
    const F1Breakdown b = f1_breakdown(predictions, truths);
    double sum = 0.0;
    int n = 0;
    for (std::size_t c = 0; c < b.per_class_f1.size(); ++c) {
        if (b.support[c] == 0) continue;
        sum += b.per_class_f1[c];
        n++;
    }
    return n > 0 ? sum / n : 0.0;
}

double gain_pct(const ModalityScores& s) {
    const double best_single = std::max(s.sv, s.uav);
    if (best_single <= 0.0) return 0.0;
    return 100.0 * (s.multi - best_single) / best_single;
}

EvalReport ablation_report(
    const std::map<model::Modality, std::map<Task, std::vector<int>>>& predictions,
    const std::map<Task, std::vector<int>>& truths) {
    using model::Modality;
    for (Modality m : {Modality::Multi, Modality::SvOnly, Modality::UavOnly})
        if (!predictions.count(m))
            throw std::invalid_argument("ablation_report: missing modality " +
                                        model::modality_name(m));
    EvalReport report;
    for (const auto& [task, truth] : truths) {
        TaskEval te;
        for (const auto& [modality, preds] : predictions) {
            const auto& p = preds.at(task);
            if (p.size() != truth.size())
                throw std::invalid_argument("ablation_report: prediction size mismatch");
            const double f1 = weighted_f1(p, truth);
            if (modality == Modality::Multi) te.weighted.multi = f1;
            if (modality == Modality::SvOnly) te.weighted.sv = f1;
            if (modality == Modality::UavOnly) te.weighted.uav = f1;
            te.per_class_f1[modality] = f1_breakdown(p, truth).per_class_f1;
        }
        te.support = f1_breakdown(predictions.at(Modality::Multi).at(task), truth).support;
        te.gain = gain_pct(te.weighted);
        report.tasks[task] = std::move(te);
        report.eval_size = static_cast<int>(truth.size());
    }
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["eval_size"] = report.eval_size;
    for (const auto& [task, te] : report.tasks) {
        nlohmann::json jt;
        jt["weighted_f1"] = {{"multi", te.weighted.multi},
                             {"sv", te.weighted.sv},
                             {"uav", te.weighted.uav}};
        jt["gain_pct"] = te.gain;
        jt["support"] = te.support;
        for (const auto& [m, f1s] : te.per_class_f1)
            jt["per_class_f1"][model::modality_name(m)] = f1s;
        j["tasks"][task_name(task)] = std::move(jt);
    }
    return j.dump(2);
}

std::string eval_report_to_table(const EvalReport& report) {
    std::ostringstream os;
    os << "Classification task      Multi   SV      UAV     Gain\n";
    os << "------------------------------------------------------\n";
    os.setf(std::ios::fixed);
    for (const auto& [task, te] : report.tasks) {
        os.precision(2);
        os.width(24);
        os.setf(std::ios::left, std::ios::adjustfield);
        os << task_name(task);
        os.unsetf(std::ios::adjustfield);
        os << " " << te.weighted.multi << "    " << te.weighted.sv << "    " << te.weighted.uav;
        os.precision(1);
        os << "    " << (te.gain >= 0 ? "+" : "") << te.gain << "%\n";
    }
    return os.str();
}

}  // namespace crossview::training
