#include "crossview/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace crossview::stats {

namespace {

// Midranks of the pooled sample, returned per input position.
std::vector<double> midranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::pair<double, double> kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw StatsError("kruskal_wallis needs at least 2 groups");
    for (const auto& g : groups)
        if (g.size() < 2) throw StatsError("kruskal_wallis group with fewer than 2 observations");

    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const double n = static_cast<double>(pooled.size());
    const std::vector<double> ranks = midranks(pooled);

    double h = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
        h += rank_sum * rank_sum / static_cast<double>(g.size());
        offset += g.size();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    // Tie correction: 1 - sum(t^3 - t) / (n^3 - n).
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double correction = 1.0 - tie_term / (n * n * n - n);
    if (correction <= 0.0) return {0.0, 1.0};  // all observations identical
    h /= correction;
    if (h < 0.0 && h > -1e-12) h = 0.0;

    const double df = static_cast<double>(groups.size()) - 1.0;
    boost::math::chi_squared chi2(df);
    const double p = h <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(chi2, h));
    return {h, p};
}

std::pair<double, double> pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw StatsError("pearson_r length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw StatsError("pearson_r needs at least 3 observations");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw StatsError("pearson_r: zero variance input");
    double r = sxy / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0);

    const double df = static_cast<double>(n) - 2.0;
    double p = 0.0;
    if (std::abs(r) >= 1.0) {
        p = 0.0;
    } else {
        const double t = r * std::sqrt(df / (1.0 - r * r));
        boost::math::students_t dist(df);
        p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
    return {r, p};
}

std::vector<TestResult> run_association_suite(std::vector<AssociationRecord> records,
                                              const AssociationConfig& cfg) {
    std::sort(records.begin(), records.end(),
              [](const AssociationRecord& a, const AssociationRecord& b) {
                  return a.building_id < b.building_id;
              });
    std::vector<AssociationRecord> valid;
    for (const auto& r : records)
        if (r.tir_valid) valid.push_back(r);
    if (valid.empty()) throw StatsError("NoValidThermalData");
    if (static_cast<int>(valid.size()) < cfg.min_n)
        throw StatsError("too few valid records for association tests");

    std::vector<TestResult> results;

    for (Task t : kAllTasks) {
        TestResult res;
        res.variable = task_name(t);
        res.kind = TestKind::KruskalWallis;
        const int unclear = unclear_class(t);
        std::map<int, std::vector<double>> by_class;
        for (const auto& r : valid) {
            const int c = r.predicted[static_cast<std::size_t>(t)];
            if (c == unclear) continue;
            by_class[c].push_back(r.tir_value);
        }
        std::vector<std::vector<double>> groups;
        for (auto& [c, vals] : by_class) {
            if (vals.size() < 2) continue;
            res.group_names.push_back(task_vocabulary(t)[static_cast<std::size_t>(c)]);
            res.group_sizes.push_back(static_cast<int>(vals.size()));
            res.group_medians.push_back(median_of(vals));
            groups.push_back(std::move(vals));
        }
        if (groups.size() < 2) {
            res.skipped = true;
            res.note = "collapsed to a single observed class";
        } else {
            auto [h, p] = kruskal_wallis(groups);
            res.statistic = h;
            res.p_value = p;
        }
        results.push_back(std::move(res));
    }

    struct NumericVar {
        std::string name;
        std::function<std::optional<double>(const AssociationRecord&)> get;
    };
    const std::vector<NumericVar> numeric_vars = {
        {"roof_brightness", [](const AssociationRecord& r) { return std::optional<double>(r.roof_brightness); }},
        {"wall_brightness", [](const AssociationRecord& r) { return std::optional<double>(r.wall_brightness); }},
        {"mean_dist_4nn_m", [](const AssociationRecord& r) { return r.mean_dist_4nn_m; }},
    };
    for (const auto& var : numeric_vars) {
        TestResult res;
        res.variable = var.name;
        res.kind = TestKind::Pearson;
        std::vector<double> x, y;
        for (const auto& r : valid) {
            auto v = var.get(r);
            if (!v) continue;
            x.push_back(*v);
            y.push_back(r.tir_value);
        }
        res.group_sizes = {static_cast<int>(x.size())};
        try {
            auto [r, p] = pearson_r(x, y);
            res.statistic = r;
            res.p_value = p;
        } catch (const StatsError& e) {
            res.skipped = true;
            res.note = e.what();
        }
        results.push_back(std::move(res));
    }

    const double alpha =
        cfg.bonferroni ? cfg.alpha / static_cast<double>(results.size()) : cfg.alpha;
    for (auto& res : results)
        res.significant = !res.skipped && res.p_value < alpha;
    return results;
}

}  // namespace crossview::stats
