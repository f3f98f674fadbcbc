#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossview/labels.hpp"

namespace crossview::stats {

class StatsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Kruskal-Wallis H with midrank tie handling and the standard tie-correction
/// divisor; p-value from the chi-square approximation with (groups - 1)
/// degrees of freedom.
std::pair<double, double> kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Sample Pearson correlation; p-value from the t distribution with n - 2
/// degrees of freedom (two-sided).
std::pair<double, double> pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct AssociationRecord {
    std::string building_id;
    std::array<int, 5> predicted{};  // class index per task, order of kAllTasks
    double roof_brightness = 0.0;
    double wall_brightness = 0.0;
    std::optional<double> mean_dist_4nn_m;
    double tir_value = 0.0;
    bool tir_valid = false;
};

enum class TestKind { KruskalWallis, Pearson };

struct TestResult {
    std::string variable;
    TestKind kind = TestKind::KruskalWallis;
    double statistic = 0.0;  // H or r
    double p_value = 1.0;
    std::vector<int> group_sizes;  // KW: per-class n; Pearson: {n}
    std::vector<std::string> group_names;
    std::vector<double> group_medians;
    bool significant = false;
    bool skipped = false;
    std::string note;
};

struct AssociationConfig {
    double alpha = 0.05;
    bool bonferroni = false;
    int min_n = 10;
};

/// One Kruskal-Wallis test per categorical attribute and one Pearson test per
/// numeric feature, each against the zonal TIR value. "Unclear" classes are
/// excluded. Records without valid TIR never enter a test.
std::vector<TestResult> run_association_suite(std::vector<AssociationRecord> records,
                                              const AssociationConfig& cfg = {});

/// Serializes results as JSON and emits per-variable fig_<variable>.csv plus
/// a rendered fig_<variable>.png (boxplot for categorical, scatter for
/// numeric variables).
void write_association_report(const std::vector<TestResult>& results,
                              const std::vector<AssociationRecord>& records,
                              const std::string& out_dir);

}  // namespace crossview::stats
