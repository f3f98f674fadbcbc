#include "crossview/training.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace crossview::training {

using model::Cgcvit;
using model::Modality;
using nn::Tensor;

// ---------------------------------------------------------------------------
// Spatial blocking

long block_id(geo::Point centroid, double block_size_m) {
    if (block_size_m <= 0.0) throw TrainingError("block size must be positive");
    const long bx = static_cast<long>(std::floor(centroid.x / block_size_m));
    const long by = static_cast<long>(std::floor(centroid.y / block_size_m));
    return bx * 1000003L + by;  // large odd multiplier keeps keys distinct in practice
}

int SpatialFoldPlan::fold_of(const std::string& building_id) const {
    auto it = building_to_fold.find(building_id);
    if (it == building_to_fold.end())
        throw TrainingError("building not in fold plan: " + building_id);
    return it->second;
}

namespace {

std::map<long, std::vector<const LabeledPair*>> group_blocks(
    const std::vector<LabeledPair>& pairs, double block_size_m) {
    std::map<long, std::vector<const LabeledPair*>> blocks;
    for (const auto& p : pairs) blocks[block_id(p.centroid, block_size_m)].push_back(&p);
    return blocks;
}

}  // namespace

SplitResult make_split(const std::vector<LabeledPair>& pairs, std::array<double, 3> ratios,
                       double block_size_m, uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw TrainingError("split ratios must sum to 1");
    auto blocks = group_blocks(pairs, block_size_m);
    std::vector<long> ids;
    for (const auto& [id, _] : blocks) ids.push_back(id);
    const int needed = (ratios[0] > 0) + (ratios[1] > 0) + (ratios[2] > 0);
    if (static_cast<int>(ids.size()) < needed)
        throw TrainingError("too few spatial blocks for the requested split");
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    const auto n = static_cast<double>(ids.size());
    std::size_t n_train = static_cast<std::size_t>(std::round(ratios[0] * n));
    std::size_t n_val = static_cast<std::size_t>(std::round(ratios[1] * n));
    n_train = std::min(n_train, ids.size());
    n_val = std::min(n_val, ids.size() - n_train);
    if (ratios[0] > 0 && n_train == 0) n_train = 1;
    if (ratios[1] > 0 && n_val == 0 && ids.size() > n_train) n_val = 1;

    SplitResult out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& dest = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
        for (const LabeledPair* p : blocks[ids[i]]) dest.insert(p->building_id);
    }
    if (out.val.empty() || out.test.empty())
        std::fprintf(stderr, "warning: split produced an empty val or test part\n");
    return out;
}

SpatialFoldPlan make_spatial_folds(const std::vector<LabeledPair>& pairs, int k,
                                   double block_size_m) {
    if (k < 2) throw TrainingError("need k >= 2 folds");
    auto blocks = group_blocks(pairs, block_size_m);
    if (static_cast<int>(blocks.size()) < k)
        throw TrainingError("fewer spatial blocks than folds");

    // Global per-task class counts.
    std::map<Task, std::vector<double>> global;
    for (Task t : kAllTasks) global[t].assign(task_class_count(t), 0.0);
    for (const auto& p : pairs)
        for (Task t : kAllTasks) global[t][p.labels.get(t)] += 1.0;
    const double total = static_cast<double>(pairs.size());

    struct BlockInfo {
        long id;
        std::vector<const LabeledPair*> members;
        std::map<Task, std::vector<double>> counts;
    };
    std::vector<BlockInfo> infos;
    for (auto& [id, members] : blocks) {
        BlockInfo bi;
        bi.id = id;
        bi.members = members;
        for (Task t : kAllTasks) {
            bi.counts[t].assign(task_class_count(t), 0.0);
            for (const LabeledPair* p : members) bi.counts[t][p->labels.get(t)] += 1.0;
        }
        infos.push_back(std::move(bi));
    }
    std::sort(infos.begin(), infos.end(), [](const BlockInfo& a, const BlockInfo& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.id < b.id;
    });

    std::vector<std::map<Task, std::vector<double>>> fold_counts(static_cast<std::size_t>(k));
    std::vector<double> fold_sizes(static_cast<std::size_t>(k), 0.0);
    for (auto& fc : fold_counts)
        for (Task t : kAllTasks) fc[t].assign(task_class_count(t), 0.0);

    auto cost_of = [&](int fold, const BlockInfo& bi) {
        // Deviation of fold class proportions from global after adding the
        // block, plus a size-balance term.
        double cost = 0.0;
        const double new_size = fold_sizes[static_cast<std::size_t>(fold)] +
                                static_cast<double>(bi.members.size());
        for (Task t : kAllTasks) {
            const auto& g = global.at(t);
            const auto& f = fold_counts[static_cast<std::size_t>(fold)].at(t);
            const auto& b = bi.counts.at(t);
            for (std::size_t c = 0; c < g.size(); ++c) {
                const double global_prop = g[c] / total;
                const double fold_prop = (f[c] + b[c]) / new_size;
                cost += std::abs(fold_prop - global_prop);
            }
        }
        cost += 2.0 * new_size / (total / k);
        return cost;
    };

    SpatialFoldPlan plan;
    plan.block_size_m = block_size_m;
    plan.k = k;
    for (const BlockInfo& bi : infos) {
        int best_fold = 0;
        double best_cost = std::numeric_limits<double>::max();
        for (int f = 0; f < k; ++f) {
            const double c = cost_of(f, bi);
            if (c < best_cost) {
                best_cost = c;
                best_fold = f;
            }
        }
        plan.block_to_fold[bi.id] = best_fold;
        fold_sizes[static_cast<std::size_t>(best_fold)] += static_cast<double>(bi.members.size());
        for (Task t : kAllTasks)
            for (std::size_t c = 0; c < bi.counts.at(t).size(); ++c)
                fold_counts[static_cast<std::size_t>(best_fold)][t][c] += bi.counts.at(t)[c];
        for (const LabeledPair* p : bi.members) plan.building_to_fold[p->building_id] = best_fold;
    }

    // Refinement sweeps: move single blocks between folds while that lowers
    // the summed class-proportion deviation (with a soft size-balance term).
    auto apply = [&](const BlockInfo& bi, int fold, double sign) {
        fold_sizes[static_cast<std::size_t>(fold)] += sign * static_cast<double>(bi.members.size());
        for (Task t : kAllTasks)
            for (std::size_t c = 0; c < bi.counts.at(t).size(); ++c)
                fold_counts[static_cast<std::size_t>(fold)][t][c] += sign * bi.counts.at(t)[c];
    };
    auto objective = [&]() {
        double obj = 0.0;
        const double target = total / static_cast<double>(k);
        for (int f = 0; f < k; ++f) {
            const double sz = fold_sizes[static_cast<std::size_t>(f)];
            if (sz <= 0.0) {
                // An empty fold is never acceptable; dominate every other term.
                obj += 1e9;
                continue;
            }
            for (Task t : kAllTasks) {
                const auto& g = global.at(t);
                const auto& fc = fold_counts[static_cast<std::size_t>(f)].at(t);
                for (std::size_t c = 0; c < g.size(); ++c) {
                    const double dev = std::abs(fc[c] / sz - g[c] / total);
                    obj += dev;
                    // Hinge: deviations approaching the stratification bound
                    // dominate the objective so sweeps target the worst class.
                    if (dev > 0.06) obj += 40.0 * (dev - 0.06);
                }
            }
            obj += 0.5 * std::abs(sz - target) / target;
        }
        return obj;
    };
    auto reassign = [&](const BlockInfo& bi, int fold) {
        plan.block_to_fold[bi.id] = fold;
        for (const LabeledPair* p : bi.members) plan.building_to_fold[p->building_id] = fold;
    };
    for (int sweep = 0; sweep < 20; ++sweep) {
        bool moved = false;
        for (const BlockInfo& bi : infos) {
            const int cur = plan.block_to_fold.at(bi.id);
            apply(bi, cur, -1.0);
            int best_fold = cur;
            double best_obj = std::numeric_limits<double>::max();
            for (int f = 0; f < k; ++f) {
                apply(bi, f, 1.0);
                const double obj = objective();
                apply(bi, f, -1.0);
                if (obj < best_obj - 1e-12) {
                    best_obj = obj;
                    best_fold = f;
                }
            }
            apply(bi, best_fold, 1.0);
            if (best_fold != cur) {
                moved = true;
                reassign(bi, best_fold);
            }
        }
        if (moved) continue;
        // Single moves are stuck; try exchanging pairs of blocks between
        // folds, which can fix class imbalance without unbalancing sizes.
        bool swapped = false;
        const double base = objective();
        for (std::size_t i = 0; i < infos.size() && !swapped; ++i) {
            for (std::size_t j = i + 1; j < infos.size() && !swapped; ++j) {
                const int fi = plan.block_to_fold.at(infos[i].id);
                const int fj = plan.block_to_fold.at(infos[j].id);
                if (fi == fj) continue;
                apply(infos[i], fi, -1.0);
                apply(infos[j], fj, -1.0);
                apply(infos[i], fj, 1.0);
                apply(infos[j], fi, 1.0);
                if (objective() < base - 1e-12) {
                    reassign(infos[i], fj);
                    reassign(infos[j], fi);
                    swapped = true;
                } else {
                    apply(infos[i], fj, -1.0);
                    apply(infos[j], fi, -1.0);
                    apply(infos[i], fi, 1.0);
                    apply(infos[j], fj, 1.0);
                }
            }
        }
        if (!swapped) break;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Augmentation

int AugmentPlan::multiplier_for(const AttributeLabelSet& labels) const {
    int mult = 1;
    for (const auto& [task, per_class] : multipliers) {
        const int c = labels.get(task);
        if (c < static_cast<int>(per_class.size()))
            mult = std::max(mult, per_class[static_cast<std::size_t>(c)]);
    }
    return mult;
}

AugmentPlan make_augment_plan(const std::vector<const LabeledPair*>& train_pairs, int cap) {
    AugmentPlan plan;
    const double n = static_cast<double>(train_pairs.size());
    for (Task t : kAllTasks) {
        std::vector<double> counts(task_class_count(t), 0.0);
        for (const LabeledPair* p : train_pairs) counts[p->labels.get(t)] += 1.0;
        const double majority = *std::max_element(counts.begin(), counts.end());
        std::vector<int>& mult = plan.multipliers[t];
        mult.assign(counts.size(), 1);
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0.0 || counts[c] >= 0.5 * majority) continue;
            const int m = static_cast<int>(std::round(std::min(
                static_cast<double>(cap), std::sqrt(majority / counts[c]))));
            mult[c] = std::max(1, m);
        }
        (void)n;
    }
    return plan;
}

namespace {

cv::Mat jitter_chip(const cv::Mat& chip, std::mt19937_64& rng, const cv::Vec3b& fill) {
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_real_distribution<double> angle_dist(-10.0, 10.0);
    std::uniform_real_distribution<double> gain_dist(0.9, 1.1);
    std::uniform_real_distribution<double> bias_dist(-10.0, 10.0);

    cv::Mat out = chip.clone();
    if (coin(rng)) cv::flip(out, out, 1);
    const double angle = angle_dist(rng);
    const cv::Point2f center(out.cols / 2.0f, out.rows / 2.0f);
    const cv::Mat rot = cv::getRotationMatrix2D(center, angle, 1.0);
    cv::warpAffine(out, out, rot, out.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                   cv::Scalar(fill[0], fill[1], fill[2]));
    const double gain = gain_dist(rng), bias = bias_dist(rng);
    out.convertTo(out, -1, gain, bias);
    return out;
}

}  // namespace

std::vector<LabeledPair> augment_minority(const LabeledPair& pair,
                                          const AttributeLabelSet& labels,
                                          const AugmentPlan& plan, std::mt19937_64& rng,
                                          const cv::Vec3b& fill_value) {
    const int mult = plan.multiplier_for(labels);
    if (mult < 1) throw TrainingError("augmentation multiplier < 1");
    std::vector<LabeledPair> out;
    out.push_back(pair);
    for (int i = 1; i < mult; ++i) {
        LabeledPair aug = pair;
        aug.building_id = pair.building_id + "#aug" + std::to_string(i);
        aug.top_chip = jitter_chip(pair.top_chip, rng, fill_value);
        aug.facade_chip = jitter_chip(pair.facade_chip, rng, fill_value);
        out.push_back(std::move(aug));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamOptimizer::AdamOptimizer(std::vector<model::NamedParam>& params, double lr)
    : params_(&params), lr_(lr) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i].tensor->value.size(), 0.0f);
        v_[i].assign(params[i].tensor->value.size(), 0.0f);
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : *params_) {
        p.tensor->ensure_grad();
        std::fill(p.tensor->grad.begin(), p.tensor->grad.end(), 0.0f);
    }
}

void AdamOptimizer::step() {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    t_++;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_->size(); ++i) {
        auto& p = (*params_)[i].tensor;
        if (p->grad.size() != p->value.size()) continue;
        for (std::size_t j = 0; j < p->value.size(); ++j) {
            const float g = p->grad[j];
            m_[i][j] = static_cast<float>(beta1 * m_[i][j] + (1.0 - beta1) * g);
            v_[i][j] = static_cast<float>(beta2 * v_[i][j] + (1.0 - beta2) * g * g);
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p->value[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

// ---------------------------------------------------------------------------
// Data plumbing

nn::Tensor chips_to_tensor(const std::vector<const cv::Mat*>& chips, int chip_size) {
    const int b = static_cast<int>(chips.size());
    std::vector<float> data(static_cast<std::size_t>(b) * chip_size * chip_size * 3);
    std::size_t o = 0;
    for (const cv::Mat* chip : chips) {
        if (chip->rows != chip_size || chip->cols != chip_size || chip->type() != CV_8UC3)
            throw TrainingError("chip has wrong shape for model input");
        for (int r = 0; r < chip_size; ++r)
            for (int c = 0; c < chip_size; ++c) {
                const cv::Vec3b v = chip->at<cv::Vec3b>(r, c);
                // BGR (OpenCV) -> RGB planes-last.
                data[o++] = static_cast<float>(v[2]) / 255.0f;
                data[o++] = static_cast<float>(v[1]) / 255.0f;
                data[o++] = static_cast<float>(v[0]) / 255.0f;
            }
    }
    return nn::from_values({b, chip_size, chip_size, 3}, std::move(data));
}

std::vector<float> inverse_frequency_alpha(const std::vector<int>& class_counts) {
    std::vector<float> alpha(class_counts.size(), 0.0f);
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < class_counts.size(); ++c) {
        alpha[c] = class_counts[c] > 0 ? 1.0f / static_cast<float>(class_counts[c]) : 0.0f;
        if (class_counts[c] > 0) {
            sum += alpha[c];
            present++;
        }
    }
    if (present == 0) return std::vector<float>(class_counts.size(), 1.0f);
    const float scale = static_cast<float>(present) / static_cast<float>(sum);
    for (auto& a : alpha) a *= scale;
    // Absent classes get the mean weight so the loss stays defined.
    for (std::size_t c = 0; c < class_counts.size(); ++c)
        if (class_counts[c] == 0) alpha[c] = 1.0f;
    return alpha;
}

std::map<Task, std::vector<int>> truths_of(const std::vector<const LabeledPair*>& pairs) {
    std::map<Task, std::vector<int>> out;
    for (Task t : kAllTasks) {
        auto& v = out[t];
        v.reserve(pairs.size());
        for (const LabeledPair* p : pairs) v.push_back(p->labels.get(t));
    }
    return out;
}

namespace {

struct Batch {
    std::vector<const cv::Mat*> top, facade;
    std::map<Task, std::vector<int>> targets;
};

Batch collect(const std::vector<const LabeledPair*>& pairs, std::size_t begin, std::size_t end) {
    Batch b;
    for (std::size_t i = begin; i < end; ++i) {
        b.top.push_back(&pairs[i]->top_chip);
        b.facade.push_back(&pairs[i]->facade_chip);
        for (Task t : kAllTasks) b.targets[t].push_back(pairs[i]->labels.get(t));
    }
    return b;
}

Tensor batch_loss(Cgcvit& net, const Batch& batch, Modality modality,
                  const std::map<Task, std::vector<float>>& alphas, bool use_focal,
                  float gamma) {
    const int chip_size = net.config().chip_size;
    Tensor top, facade;
    if (modality != Modality::SvOnly) top = chips_to_tensor(batch.top, chip_size);
    if (modality != Modality::UavOnly) facade = chips_to_tensor(batch.facade, chip_size);
    auto logits = net.forward(top, facade, modality);
    Tensor loss;
    for (Task t : kAllTasks) {
        Tensor l = use_focal
                       ? model::focal_loss(logits.at(t), batch.targets.at(t), gamma, alphas.at(t))
                       : model::softmax_cross_entropy(logits.at(t), batch.targets.at(t));
        loss = loss ? nn::add(loss, l) : l;
    }
    return loss;
}

}  // namespace

std::map<Task, std::vector<int>> predict(Cgcvit& net, const std::vector<const LabeledPair*>& pairs,
                                         Modality modality, int batch_size) {
    std::map<Task, std::vector<int>> preds;
    for (Task t : kAllTasks) preds[t].reserve(pairs.size());
    const int chip_size = net.config().chip_size;
    for (std::size_t i = 0; i < pairs.size(); i += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(pairs.size(), i + static_cast<std::size_t>(batch_size));
        Batch b = collect(pairs, i, end);
        Tensor top, facade;
        if (modality != Modality::SvOnly) top = chips_to_tensor(b.top, chip_size);
        if (modality != Modality::UavOnly) facade = chips_to_tensor(b.facade, chip_size);
        auto logits = net.forward(top, facade, modality);
        for (Task t : kAllTasks) {
            const Tensor& z = logits.at(t);
            const int classes = z->shape[1];
            for (int r = 0; r < z->shape[0]; ++r) {
                const float* row = z->value.data() + static_cast<long>(r) * classes;
                preds[t].push_back(static_cast<int>(
                    std::max_element(row, row + classes) - row));
            }
        }
    }
    return preds;
}

TrainResult train(const std::vector<LabeledPair>& pairs, const std::set<std::string>& train_ids,
                  const std::set<std::string>& val_ids, const model::GcvitConfig& model_cfg,
                  Modality modality, const TrainConfig& cfg) {
    std::vector<const LabeledPair*> train_base, val_pairs;
    for (const auto& p : pairs) {
        if (train_ids.count(p.building_id)) train_base.push_back(&p);
        if (val_ids.count(p.building_id)) val_pairs.push_back(&p);
    }
    if (train_base.empty()) throw TrainingError("empty training set");

    // Minority augmentation (training split only).
    std::mt19937_64 aug_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const AugmentPlan plan = make_augment_plan(train_base, cfg.augment_cap);
    std::vector<LabeledPair> augmented;
    for (const LabeledPair* p : train_base) {
        auto variants = augment_minority(*p, p->labels, plan, aug_rng);
        for (auto& v : variants) augmented.push_back(std::move(v));
    }
    std::vector<const LabeledPair*> train_pairs;
    for (const auto& p : augmented) train_pairs.push_back(&p);

    // Focal alphas from the augmented training distribution.
    std::map<Task, std::vector<float>> alphas;
    for (Task t : kAllTasks) {
        std::vector<int> counts(task_class_count(t), 0);
        for (const LabeledPair* p : train_pairs) counts[p->labels.get(t)]++;
        alphas[t] = inverse_frequency_alpha(counts);
    }

    TrainResult result;
    result.model = std::make_unique<Cgcvit>(model_cfg, cfg.seed);
    AdamOptimizer opt(result.model->parameters(), cfg.lr);
    std::mt19937_64 shuffle_rng(cfg.seed);

    double best_f1 = -1.0;
    int best_epoch = -1;
    std::vector<std::vector<float>> best_params;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.cosine_decay)
            opt.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(M_PI * epoch / cfg.max_epochs)));
        std::shuffle(train_pairs.begin(), train_pairs.end(), shuffle_rng);

        double train_loss_sum = 0.0;
        long batches = 0;
        for (std::size_t i = 0; i < train_pairs.size();
             i += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(train_pairs.size(), i + static_cast<std::size_t>(cfg.batch_size));
            Batch b = collect(train_pairs, i, end);
            opt.zero_grad();
            Tensor loss =
                batch_loss(*result.model, b, modality, alphas, cfg.use_focal, cfg.focal_gamma);
            if (!std::isfinite(loss->value[0]))
                throw TrainingError("training diverged: non-finite loss at epoch " +
                                    std::to_string(epoch));
            nn::backward(loss);
            opt.step();
            train_loss_sum += loss->value[0];
            batches++;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = batches ? train_loss_sum / static_cast<double>(batches) : 0.0;

        if (!val_pairs.empty()) {
            double val_loss_sum = 0.0;
            long val_batches = 0;
            for (std::size_t i = 0; i < val_pairs.size();
                 i += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t end =
                    std::min(val_pairs.size(), i + static_cast<std::size_t>(cfg.batch_size));
                Batch b = collect(val_pairs, i, end);
                Tensor loss =
                    batch_loss(*result.model, b, modality, alphas, cfg.use_focal, cfg.focal_gamma);
                val_loss_sum += loss->value[0];
                val_batches++;
            }
            stats.val_loss = val_loss_sum / static_cast<double>(val_batches);
            auto preds = predict(*result.model, val_pairs, modality, cfg.batch_size);
            auto truth = truths_of(val_pairs);
            double f1_sum = 0.0;
            for (Task t : kAllTasks) f1_sum += weighted_f1(preds.at(t), truth.at(t));
            stats.val_f1_mean = f1_sum / static_cast<double>(kAllTasks.size());
        }
        result.curves.push_back(stats);

        const double score = val_pairs.empty() ? -stats.train_loss : stats.val_f1_mean;
        if (score > best_f1 + 1e-9) {
            best_f1 = score;
            best_epoch = epoch;
            since_best = 0;
            best_params.clear();
            for (const auto& p : result.model->parameters())
                best_params.push_back(p.tensor->value);
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    if (best_epoch >= 0 && !best_params.empty()) {
        auto& params = result.model->parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor->value = best_params[i];
    }
    result.best_epoch = std::max(0, best_epoch);
    result.best_val_f1 = std::max(0.0, best_f1);
    return result;
}

}  // namespace crossview::training
