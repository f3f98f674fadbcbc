#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossview/labels.hpp"
#include "crossview/model.hpp"

namespace crossview::training {

/// Support-weighted mean of per-class F1; classes with zero support are
/// excluded from the weighting. Throws on empty input.
double weighted_f1(const std::vector<int>& predictions, const std::vector<int>& truths);

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& truths);

struct ModalityScores {
    double multi = 0.0;
    double sv = 0.0;
    double uav = 0.0;
};

/// 100 * (F1_multi - best_single) / best_single.
double gain_pct(const ModalityScores& s);

struct TaskEval {
    ModalityScores weighted;  // weighted F1 per modality
    std::map<model::Modality, std::vector<double>> per_class_f1;
    std::vector<int> support;  // per class, from truths
    double gain = 0.0;         // percent
};

struct EvalReport {
    std::map<Task, TaskEval> tasks;
    int eval_size = 0;
};

/// Builds the cross-modality comparison from per-modality predictions over
/// the same evaluation set.
EvalReport ablation_report(
    const std::map<model::Modality, std::map<Task, std::vector<int>>>& predictions,
    const std::map<Task, std::vector<int>>& truths);

std::string eval_report_to_json(const EvalReport& report);
/// Table mirroring the per-task multi/SV/UAV weighted-F1 comparison.
std::string eval_report_to_table(const EvalReport& report);

}  // namespace crossview::training
