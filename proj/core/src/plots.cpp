#include "crossview/stats.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "crossview/csv.hpp"

namespace crossview::stats {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFigW = 640;
constexpr int kFigH = 480;
constexpr int kMargin = 60;

struct Quartiles {
    double lo, q1, med, q3, hi;
};

Quartiles quartiles(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * (static_cast<double>(v.size()) - 1.0);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        if (i + 1 >= v.size()) return v.back();
        return v[i] * (1.0 - frac) + v[i + 1] * frac;
    };
    return {v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back()};
}

int y_px(double v, double vmin, double vmax) {
    if (vmax <= vmin) return kFigH / 2;
    return kFigH - kMargin -
           static_cast<int>((v - vmin) / (vmax - vmin) * (kFigH - 2 * kMargin));
}

void draw_axes(cv::Mat& img, const std::string& title) {
    img.setTo(cv::Scalar(255, 255, 255));
    cv::line(img, {kMargin, kFigH - kMargin}, {kFigW - kMargin / 2, kFigH - kMargin},
             cv::Scalar(0, 0, 0));
    cv::line(img, {kMargin, kMargin / 2}, {kMargin, kFigH - kMargin}, cv::Scalar(0, 0, 0));
    cv::putText(img, title, {kMargin, kMargin / 2 - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.55,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
}

void render_boxplot(const std::string& path, const std::string& title,
                    const std::vector<std::string>& names,
                    const std::vector<std::vector<double>>& groups) {
    cv::Mat img(kFigH, kFigW, CV_8UC3);
    draw_axes(img, title + " vs TIR");
    double vmin = 1e300, vmax = -1e300;
    for (const auto& g : groups)
        for (double v : g) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    const int n = static_cast<int>(groups.size());
    const int span = (kFigW - 2 * kMargin) / std::max(1, n);
    for (int i = 0; i < n; ++i) {
        if (groups[static_cast<std::size_t>(i)].empty()) continue;
        const Quartiles q = quartiles(groups[static_cast<std::size_t>(i)]);
        const int cx = kMargin + span * i + span / 2;
        const int half = std::max(8, span / 5);
        const cv::Scalar color(160, 90, 30);
        cv::rectangle(img, {cx - half, y_px(q.q3, vmin, vmax)}, {cx + half, y_px(q.q1, vmin, vmax)},
                      color, 1, cv::LINE_AA);
        cv::line(img, {cx - half, y_px(q.med, vmin, vmax)}, {cx + half, y_px(q.med, vmin, vmax)},
                 cv::Scalar(0, 0, 200), 2, cv::LINE_AA);
        cv::line(img, {cx, y_px(q.hi, vmin, vmax)}, {cx, y_px(q.q3, vmin, vmax)}, color, 1);
        cv::line(img, {cx, y_px(q.q1, vmin, vmax)}, {cx, y_px(q.lo, vmin, vmax)}, color, 1);
        cv::putText(img, names[static_cast<std::size_t>(i)], {cx - half, kFigH - kMargin + 20},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    cv::imwrite(path, img);
}

void render_scatter(const std::string& path, const std::string& title,
                    const std::vector<double>& x, const std::vector<double>& y) {
    cv::Mat img(kFigH, kFigW, CV_8UC3);
    draw_axes(img, title + " vs TIR");
    if (x.empty()) {
        cv::imwrite(path, img);
        return;
    }
    const double xmin = *std::min_element(x.begin(), x.end());
    const double xmax = *std::max_element(x.begin(), x.end());
    const double ymin = *std::min_element(y.begin(), y.end());
    const double ymax = *std::max_element(y.begin(), y.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int px =
            kMargin + static_cast<int>((xmax > xmin ? (x[i] - xmin) / (xmax - xmin) : 0.5) *
                                       (kFigW - 2.5 * kMargin));
        cv::circle(img, {px, y_px(y[i], ymin, ymax)}, 2, cv::Scalar(160, 90, 30), cv::FILLED,
                   cv::LINE_AA);
    }
    cv::imwrite(path, img);
}

}  // namespace

void write_association_report(const std::vector<TestResult>& results,
                              const std::vector<AssociationRecord>& records,
                              const std::string& out_dir) {
    fs::create_directories(out_dir);

    std::vector<AssociationRecord> valid(records);
    std::sort(valid.begin(), valid.end(), [](const auto& a, const auto& b) {
        return a.building_id < b.building_id;
    });
    valid.erase(std::remove_if(valid.begin(), valid.end(),
                               [](const AssociationRecord& r) { return !r.tir_valid; }),
                valid.end());

    json doc = json::array();
    for (const auto& res : results) {
        json j;
        j["variable"] = res.variable;
        j["kind"] = res.kind == TestKind::KruskalWallis ? "kruskal_wallis" : "pearson";
        j["statistic"] = res.statistic;
        j["p_value"] = res.p_value;
        j["group_sizes"] = res.group_sizes;
        j["group_names"] = res.group_names;
        j["group_medians"] = res.group_medians;
        j["significant"] = res.significant;
        j["skipped"] = res.skipped;
        if (!res.note.empty()) j["note"] = res.note;
        doc.push_back(std::move(j));
    }
    std::ofstream((fs::path(out_dir) / "association_results.json").string()) << doc.dump(2) << "\n";

    for (const auto& res : results) {
        const std::string base = (fs::path(out_dir) / ("fig_" + res.variable)).string();
        csv::Table table;
        if (res.kind == TestKind::KruskalWallis) {
            auto task = task_from_name(res.variable);
            table.header = {"class", "tir_value"};
            std::vector<std::vector<double>> groups(res.group_names.size());
            for (const auto& r : valid) {
                const int c = r.predicted[static_cast<std::size_t>(*task)];
                const std::string& cls = task_vocabulary(*task)[static_cast<std::size_t>(c)];
                auto it = std::find(res.group_names.begin(), res.group_names.end(), cls);
                if (it == res.group_names.end()) continue;
                groups[static_cast<std::size_t>(it - res.group_names.begin())].push_back(r.tir_value);
                table.rows.push_back({cls, std::to_string(r.tir_value)});
            }
            render_boxplot(base + ".png", res.variable, res.group_names, groups);
        } else {
            table.header = {res.variable, "tir_value"};
            std::vector<double> x, y;
            for (const auto& r : valid) {
                std::optional<double> v;
                if (res.variable == "roof_brightness") v = r.roof_brightness;
                else if (res.variable == "wall_brightness") v = r.wall_brightness;
                else if (res.variable == "mean_dist_4nn_m") v = r.mean_dist_4nn_m;
                if (!v) continue;
                x.push_back(*v);
                y.push_back(r.tir_value);
                table.rows.push_back({std::to_string(*v), std::to_string(r.tir_value)});
            }
            render_scatter(base + ".png", res.variable, x, y);
        }
        csv::write_file(base + ".csv", table);
    }
}

}  // namespace crossview::stats
