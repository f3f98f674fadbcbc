#pragma once

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crossview/labels.hpp"
#include "crossview/nn/tensor.hpp"

namespace crossview::model {

using nn::Shape;
using nn::Tensor;

enum class Modality { Multi, SvOnly, UavOnly };
const std::string& modality_name(Modality m);
Modality modality_from_name(const std::string& name);

struct GcvitConfig {
    int chip_size = 256;
    int patch_size = 32;
    std::array<int, 4> stage_depths{1, 1, 2, 1};
    std::array<int, 4> stage_dims{32, 64, 128, 256};
    std::array<int, 4> window_sizes{4, 4, 2, 1};
    std::array<int, 4> num_heads{2, 2, 4, 8};
    int mlp_ratio = 2;
    float focal_gamma = 2.0f;
    std::string alpha_mode = "inverse_frequency";  // or "uniform"

    static GcvitConfig toy();
    static GcvitConfig tiny();

    void validate() const;
    /// Feature-map edge length entering stage `s` (stage 0 = after patch embed).
    int stage_resolution(int s) const;
    int fused_dim() const { return 2 * stage_dims[3]; }
};

/// G = Softmax(g_q k^T / sqrt(s) + p) v, softmax over the key axis.
/// g_q, k, v: [..., heads, tokens, head_dim]; p: [heads, tokens, tokens]
/// (broadcast over leading dims). s is the scaling factor, usually head_dim.
Tensor global_token_attention(const Tensor& g_q, const Tensor& k, const Tensor& v,
                              const Tensor& p, float s);

/// Mean over the batch of -sum_c y_c log softmax(z)_c. z: [B, C], y one-hot
/// rows. Log-sum-exp stabilized. Throws if y rows are not one-hot.
Tensor softmax_cross_entropy(const Tensor& z, const std::vector<int>& targets);

/// Focal loss: mean over batch of -alpha_c (1 - p_c)^gamma log p_c with
/// p = softmax(z). alpha may be empty (all ones) or per-class.
Tensor focal_loss(const Tensor& z, const std::vector<int>& targets, float gamma,
                  const std::vector<float>& alpha = {});

/// Double-precision scalar evaluations of the same loss formulas. These define
/// the numeric contract; the tensor ops are verified against them to within
/// single-precision rounding. z: one row of logits per sample.
double softmax_cross_entropy_value(const std::vector<std::vector<double>>& z,
                                   const std::vector<int>& targets);
double focal_loss_value(const std::vector<std::vector<double>>& z,
                        const std::vector<int>& targets, double gamma,
                        const std::vector<double>& alpha = {});

struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Dual-stream global-context vision transformer with per-task linear heads.
class Cgcvit {
public:
    explicit Cgcvit(GcvitConfig cfg, uint64_t seed = 42);

    const GcvitConfig& config() const { return cfg_; }
    std::vector<NamedParam>& parameters() { return params_; }
    const std::vector<NamedParam>& parameters() const { return params_; }
    long parameter_count() const;

    /// chips: [B, S, S, 3] float in [0,1] flattened row-major.
    /// Returns the pooled stream feature [B, final_dim].
    Tensor stream_forward(const Tensor& chips, int stream);  // 0 = top, 1 = facade

    /// Either feature may be null (single-modality mode); the missing slot is
    /// filled by a learned constant vector.
    std::map<Task, Tensor> fuse_and_classify(Tensor top_feature, Tensor facade_feature,
                                             int batch);

    /// Full forward pass respecting the modality (the unused stream is not
    /// evaluated).
    std::map<Task, Tensor> forward(const Tensor& top_chips, const Tensor& facade_chips,
                                   Modality modality);

    Tensor find_param(const std::string& name) const;

private:
    struct Block {
        Tensor norm1_g, norm1_b;
        Tensor wq, bq, wk, bk, wv, bv, wproj, bproj;
        Tensor bias_table;  // [(2w-1)^2, heads]
        Tensor norm2_g, norm2_b;
        Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    };
    struct Stage {
        std::vector<Block> blocks;  // alternating local / global
        Tensor token_gen_w, token_gen_b;
        Tensor down_w, down_b;  // empty for the last stage
    };
    struct Stream {
        Tensor patch_w, patch_b;
        std::array<Stage, 4> stages;
        Tensor final_norm_g, final_norm_b;
        Tensor placeholder;  // stands in when this stream's input is absent
    };

    Tensor param(Shape shape, const std::string& name, bool trunc_normal);
    Block make_block(const std::string& prefix, int dim, int heads, int window);
    Tensor block_attention(const Block& blk, const Tensor& windows, Tensor global_q, int dim,
                           int heads, int window, const std::vector<int>& bias_index);
    Tensor run_stage(Stream& stream, int stage_idx, Tensor fmap, int batch);

    GcvitConfig cfg_;
    std::array<Stream, 2> streams_;
    std::map<Task, std::pair<Tensor, Tensor>> heads_;
    std::vector<NamedParam> params_;
    std::array<std::vector<int>, 4> bias_indices_;  // per stage
    std::mt19937_64 rng_;
};

/// Relative-position bias lookup indices for a w*w token window:
/// index[i*T + j] identifies the offset bucket of token j relative to i.
std::vector<int> relative_bias_indices(int window);

}  // namespace crossview::model
