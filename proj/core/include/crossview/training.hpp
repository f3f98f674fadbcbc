#pragma once

#include <opencv2/core.hpp>

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "crossview/checkpoint.hpp"
#include "crossview/geometry.hpp"
#include "crossview/labels.hpp"
#include "crossview/metrics.hpp"
#include "crossview/model.hpp"

namespace crossview::training {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One labeled training example: the two chips plus the annotation row and
/// the building centroid used for spatial blocking.
struct LabeledPair {
    std::string building_id;
    cv::Mat top_chip;     // CV_8UC3 chip_size^2
    cv::Mat facade_chip;  // CV_8UC3 chip_size^2
    AttributeLabelSet labels;
    geo::Point centroid;
};

// ---------------------------------------------------------------------------
// Spatial blocking

long block_id(geo::Point centroid, double block_size_m);

struct SpatialFoldPlan {
    double block_size_m = 100.0;
    int k = 5;
    std::map<long, int> block_to_fold;
    std::map<std::string, int> building_to_fold;

    int fold_of(const std::string& building_id) const;
};

struct SplitResult {
    std::set<std::string> train, val, test;
};

/// Block-granular 70/15/15-style split; seeded block shuffle.
SplitResult make_split(const std::vector<LabeledPair>& pairs, std::array<double, 3> ratios,
                       double block_size_m, uint64_t seed);

/// Greedy stratified assignment of spatial blocks to k folds: blocks largest
/// first, each placed on the fold whose per-task class balance benefits most.
SpatialFoldPlan make_spatial_folds(const std::vector<LabeledPair>& pairs, int k,
                                   double block_size_m);

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentPlan {
    /// multiplier per (task, class); the effective multiplier of a pair is
    /// the max over its labels. 1 = keep original only.
    std::map<Task, std::vector<int>> multipliers;
    int multiplier_for(const AttributeLabelSet& labels) const;
};

/// Inverse-frequency multipliers from the training histogram, capped.
AugmentPlan make_augment_plan(const std::vector<const LabeledPair*>& train_pairs, int cap = 4);

/// Original plus (multiplier-1) augmented variants: horizontal flips, small
/// rotations (max 10 deg), photometric jitter. Geometric transforms are drawn
/// per view; labels are unchanged.
std::vector<LabeledPair> augment_minority(const LabeledPair& pair,
                                          const AttributeLabelSet& labels,
                                          const AugmentPlan& plan, std::mt19937_64& rng,
                                          const cv::Vec3b& fill_value = {128, 128, 128});

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    double lr = 3e-4;
    int batch_size = 16;
    int max_epochs = 100;
    int patience = 10;
    uint64_t seed = 42;
    bool deterministic = true;
    bool cosine_decay = true;
    bool use_focal = true;      // focal for imbalanced tasks (default: all)
    float focal_gamma = 2.0f;
    int augment_cap = 4;
    double majority_share_focal_threshold = 0.80;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_f1_mean = 0.0;  // weighted F1 averaged over tasks
};

struct TrainResult {
    std::unique_ptr<model::Cgcvit> model;
    std::vector<EpochStats> curves;
    int best_epoch = 0;
    double best_val_f1 = 0.0;
};

/// Adam with optional cosine decay over max_epochs.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<model::NamedParam>& params, double lr);
    void step();
    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    std::vector<model::NamedParam>* params_;
    double lr_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

/// Chips -> [B, S, S, 3] float tensor in [0, 1].
nn::Tensor chips_to_tensor(const std::vector<const cv::Mat*>& chips, int chip_size);

/// Per-class focal alpha: inverse class frequency normalized to mean 1.
std::vector<float> inverse_frequency_alpha(const std::vector<int>& class_counts);

TrainResult train(const std::vector<LabeledPair>& pairs, const std::set<std::string>& train_ids,
                  const std::set<std::string>& val_ids, const model::GcvitConfig& model_cfg,
                  model::Modality modality, const TrainConfig& cfg);

/// Argmax predictions per task over the given pairs.
std::map<Task, std::vector<int>> predict(model::Cgcvit& net,
                                         const std::vector<const LabeledPair*>& pairs,
                                         model::Modality modality, int batch_size = 16);

std::map<Task, std::vector<int>> truths_of(const std::vector<const LabeledPair*>& pairs);

}  // namespace crossview::training
