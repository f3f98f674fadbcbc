#include "crossview/model.hpp"

#include <algorithm>
#include <cmath>

namespace crossview::model {

using namespace nn;

const std::string& modality_name(Modality m) {
    static const std::vector<std::string> names = {"multi", "sv", "uav"};
    switch (m) {
        case Modality::Multi: return names[0];
        case Modality::SvOnly: return names[1];
        case Modality::UavOnly: return names[2];
    }
    return names[0];
}

Modality modality_from_name(const std::string& name) {
    if (name == "multi") return Modality::Multi;
    if (name == "sv" || name == "sv_only") return Modality::SvOnly;
    if (name == "uav" || name == "uav_only") return Modality::UavOnly;
    throw NnError("unknown modality: " + name);
}

GcvitConfig GcvitConfig::toy() {
    // Desk-scale profile: trains from scratch on small synthetic scenes in
    // minutes on one CPU core.
    GcvitConfig c;
    c.chip_size = 64;
    c.patch_size = 8;
    c.stage_depths = {1, 1, 1, 1};
    c.stage_dims = {8, 16, 16, 32};
    c.window_sizes = {2, 2, 1, 1};
    c.num_heads = {2, 2, 2, 2};
    return c;
}

GcvitConfig GcvitConfig::tiny() {
    GcvitConfig c;
    c.patch_size = 4;
    c.stage_depths = {3, 4, 19, 5};
    c.stage_dims = {64, 128, 256, 512};
    c.window_sizes = {7, 7, 14, 7};
    c.num_heads = {2, 4, 8, 16};
    c.mlp_ratio = 3;
    return c;
}

void GcvitConfig::validate() const {
    if (chip_size % patch_size != 0)
        throw NnError("chip_size must be divisible by patch_size");
    for (int s = 0; s < 4; ++s) {
        const int res = stage_resolution(s);
        if (res < 1) throw NnError("stage resolution underflow");
        if (res % std::min(window_sizes[static_cast<std::size_t>(s)], res) != 0)
            throw NnError("stage resolution not divisible by window size");
        if (stage_dims[static_cast<std::size_t>(s)] % num_heads[static_cast<std::size_t>(s)] != 0)
            throw NnError("stage dim not divisible by head count");
    }
    const std::map<Task, int> expected = {{Task::Openness, 3},
                                          {Task::Floors, 5},
                                          {Task::Vegetation, 2},
                                          {Task::Wall, 5},
                                          {Task::Roof, 6}};
    for (const auto& [task, count] : expected)
        if (task_class_count(task) != count) throw NnError("task class count mismatch");
}

int GcvitConfig::stage_resolution(int s) const {
    return (chip_size / patch_size) >> s;
}

// ---------------------------------------------------------------------------

Tensor global_token_attention(const Tensor& g_q, const Tensor& k, const Tensor& v,
                              const Tensor& p, float s) {
    if (s <= 0.0f) throw NnError("attention scale must be positive");
    for (const auto& t : {g_q, k, v})
        for (float x : t->value)
            if (!std::isfinite(x)) throw NnError("non-finite attention input");
    Tensor logits = mul_scalar(matmul(g_q, k, /*transpose_b=*/true), 1.0f / std::sqrt(s));
    logits = add(logits, p);
    return matmul(softmax_last(logits), v);
}

namespace {

void check_targets(const Tensor& z, const std::vector<int>& targets) {
    if (z->shape.size() != 2) throw NnError("loss expects logits [B, C]");
    if (static_cast<int>(targets.size()) != z->shape[0])
        throw NnError("loss: target count mismatch");
    for (int t : targets)
        if (t < 0 || t >= z->shape[1]) throw NnError("loss: target not a valid one-hot class");
}

Tensor one_hot(const std::vector<int>& targets, int classes) {
    std::vector<float> v(targets.size() * static_cast<std::size_t>(classes), 0.0f);
    for (std::size_t i = 0; i < targets.size(); ++i)
        v[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(targets[i])] = 1.0f;
    return from_values({static_cast<int>(targets.size()), classes}, std::move(v));
}

}  // namespace

Tensor softmax_cross_entropy(const Tensor& z, const std::vector<int>& targets) {
    check_targets(z, targets);
    const Tensor y = one_hot(targets, z->shape[1]);
    const Tensor nll = mul_scalar(sum_axis(mul(y, log_softmax_last(z)), -1), -1.0f);
    return mean_all(nll);
}

Tensor focal_loss(const Tensor& z, const std::vector<int>& targets, float gamma,
                  const std::vector<float>& alpha) {
    if (gamma < 0.0f) throw NnError("focal gamma must be >= 0");
    check_targets(z, targets);
    const int classes = z->shape[1];
    if (!alpha.empty() && static_cast<int>(alpha.size()) != classes)
        throw NnError("focal alpha size mismatch");
    for (float a : alpha)
        if (a < 0.0f) throw NnError("focal alpha must be >= 0");

    const Tensor y = one_hot(targets, classes);
    const Tensor logp = log_softmax_last(z);
    const Tensor logp_c = sum_axis(mul(y, logp), -1);            // [B]
    const Tensor p_c = exp_t(logp_c);                            // [B]
    const Tensor factor = pow_scalar(add_scalar(mul_scalar(p_c, -1.0f), 1.0f), gamma);
    Tensor per_sample = mul_scalar(mul(factor, logp_c), -1.0f);  // [B]
    if (!alpha.empty()) {
        std::vector<float> a(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i)
            a[i] = alpha[static_cast<std::size_t>(targets[i])];
        per_sample = mul(per_sample, from_values({static_cast<int>(targets.size())}, std::move(a)));
    }
    return mean_all(per_sample);
}

namespace {

double log_softmax_at(const std::vector<double>& row, int c) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    return row[static_cast<std::size_t>(c)] - mx - std::log(z);
}

}  // namespace

double softmax_cross_entropy_value(const std::vector<std::vector<double>>& z,
                                   const std::vector<int>& targets) {
    if (z.empty() || z.size() != targets.size())
        throw NnError("cross entropy: logits/targets size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        total -= log_softmax_at(z[i], targets[i]);
    return total / static_cast<double>(z.size());
}

double focal_loss_value(const std::vector<std::vector<double>>& z,
                        const std::vector<int>& targets, double gamma,
                        const std::vector<double>& alpha) {
    if (gamma < 0.0) throw NnError("focal gamma must be >= 0");
    if (z.empty() || z.size() != targets.size())
        throw NnError("focal loss: logits/targets size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double logp = log_softmax_at(z[i], targets[i]);
        const double p = std::exp(logp);
        const double a =
            alpha.empty() ? 1.0 : alpha.at(static_cast<std::size_t>(targets[i]));
        total -= a * std::pow(1.0 - p, gamma) * logp;
    }
    return total / static_cast<double>(z.size());
}

// ---------------------------------------------------------------------------

std::vector<int> relative_bias_indices(int window) {
    const int t = window * window;
    std::vector<int> idx(static_cast<std::size_t>(t) * t);
    for (int i = 0; i < t; ++i) {
        const int yi = i / window, xi = i % window;
        for (int j = 0; j < t; ++j) {
            const int yj = j / window, xj = j % window;
            const int dy = yj - yi + window - 1;
            const int dx = xj - xi + window - 1;
            idx[static_cast<std::size_t>(i) * t + j] = dy * (2 * window - 1) + dx;
        }
    }
    return idx;
}

Cgcvit::Cgcvit(GcvitConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
    for (int s = 0; s < 4; ++s) {
        const int res = cfg_.stage_resolution(s);
        const int w = std::min(cfg_.window_sizes[static_cast<std::size_t>(s)], res);
        bias_indices_[static_cast<std::size_t>(s)] = relative_bias_indices(w);
    }
    const int patch_in = cfg_.patch_size * cfg_.patch_size * 3;
    for (int si = 0; si < 2; ++si) {
        Stream& stream = streams_[static_cast<std::size_t>(si)];
        const std::string sp = si == 0 ? "top." : "facade.";
        stream.patch_w = param({patch_in, cfg_.stage_dims[0]}, sp + "patch.w", true);
        stream.patch_b = param({cfg_.stage_dims[0]}, sp + "patch.b", false);
        for (int s = 0; s < 4; ++s) {
            Stage& stage = stream.stages[static_cast<std::size_t>(s)];
            const int dim = cfg_.stage_dims[static_cast<std::size_t>(s)];
            const int heads = cfg_.num_heads[static_cast<std::size_t>(s)];
            const int res = cfg_.stage_resolution(s);
            const int w = std::min(cfg_.window_sizes[static_cast<std::size_t>(s)], res);
            const std::string pp = sp + "stage" + std::to_string(s) + ".";
            for (int d = 0; d < cfg_.stage_depths[static_cast<std::size_t>(s)]; ++d) {
                stage.blocks.push_back(
                    make_block(pp + "local" + std::to_string(d) + ".", dim, heads, w));
                stage.blocks.push_back(
                    make_block(pp + "global" + std::to_string(d) + ".", dim, heads, w));
            }
            stage.token_gen_w = param({dim, dim}, pp + "token_gen.w", true);
            stage.token_gen_b = param({dim}, pp + "token_gen.b", false);
            if (s < 3) {
                const int next = cfg_.stage_dims[static_cast<std::size_t>(s) + 1];
                stage.down_w = param({dim, next}, pp + "down.w", true);
                stage.down_b = param({next}, pp + "down.b", false);
            }
        }
        stream.final_norm_g = param({cfg_.stage_dims[3]}, sp + "final_norm.g", false);
        for (auto& v : stream.final_norm_g->value) v = 1.0f;
        stream.final_norm_b = param({cfg_.stage_dims[3]}, sp + "final_norm.b", false);
        stream.placeholder = param({cfg_.stage_dims[3]}, sp + "placeholder", true);
    }
    for (Task t : kAllTasks) {
        const int classes = task_class_count(t);
        Tensor w = param({cfg_.fused_dim(), classes}, "head." + task_name(t) + ".w", true);
        Tensor b = param({classes}, "head." + task_name(t) + ".b", false);
        heads_[t] = {w, b};
    }
}

Tensor Cgcvit::param(Shape shape, const std::string& name, bool trunc_normal) {
    Tensor t = make_tensor(std::move(shape), /*requires_grad=*/true, name);
    if (trunc_normal) {
        std::normal_distribution<float> dist(0.0f, 0.02f);
        for (auto& v : t->value) {
            float x;
            do {
                x = dist(rng_);
            } while (std::abs(x) > 0.04f);
            v = x;
        }
    }
    params_.push_back({name, t});
    return t;
}

Cgcvit::Block Cgcvit::make_block(const std::string& prefix, int dim, int heads, int window) {
    Block b;
    b.norm1_g = param({dim}, prefix + "norm1.g", false);
    for (auto& v : b.norm1_g->value) v = 1.0f;
    b.norm1_b = param({dim}, prefix + "norm1.b", false);
    b.wq = param({dim, dim}, prefix + "q.w", true);
    b.bq = param({dim}, prefix + "q.b", false);
    b.wk = param({dim, dim}, prefix + "k.w", true);
    b.bk = param({dim}, prefix + "k.b", false);
    b.wv = param({dim, dim}, prefix + "v.w", true);
    b.bv = param({dim}, prefix + "v.b", false);
    b.wproj = param({dim, dim}, prefix + "proj.w", true);
    b.bproj = param({dim}, prefix + "proj.b", false);
    b.bias_table = param({(2 * window - 1) * (2 * window - 1), heads}, prefix + "bias", false);
    b.norm2_g = param({dim}, prefix + "norm2.g", false);
    for (auto& v : b.norm2_g->value) v = 1.0f;
    b.norm2_b = param({dim}, prefix + "norm2.b", false);
    const int hidden = dim * cfg_.mlp_ratio;
    b.mlp_w1 = param({dim, hidden}, prefix + "mlp.w1", true);
    b.mlp_b1 = param({hidden}, prefix + "mlp.b1", false);
    b.mlp_w2 = param({hidden, dim}, prefix + "mlp.w2", true);
    b.mlp_b2 = param({dim}, prefix + "mlp.b2", false);
    return b;
}

long Cgcvit::parameter_count() const {
    long n = 0;
    for (const auto& p : params_) n += p.tensor->numel();
    return n;
}

Tensor Cgcvit::find_param(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p.tensor;
    throw NnError("no parameter named " + name);
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

Tensor split_heads(const Tensor& x, int heads, int head_dim) {
    // [B, T, C] -> [B, heads, T, head_dim]
    const int b = x->shape[0], t = x->shape[1];
    return permute(reshape(x, {b, t, heads, head_dim}), {0, 2, 1, 3});
}

Tensor merge_heads(const Tensor& x) {
    // [B, heads, T, head_dim] -> [B, T, C]
    const int b = x->shape[0], h = x->shape[1], t = x->shape[2], d = x->shape[3];
    return reshape(permute(x, {0, 2, 1, 3}), {b, t, h * d});
}

}  // namespace

Tensor Cgcvit::block_attention(const Block& blk, const Tensor& windows, Tensor global_q, int dim,
                               int heads, int window, const std::vector<int>& bias_index) {
    const int t = window * window;
    const int head_dim = dim / heads;
    const Tensor x_norm = layernorm(windows, blk.norm1_g, blk.norm1_b);

    Tensor q_src = global_q ? global_q : x_norm;
    Tensor q = split_heads(linear(q_src, blk.wq, blk.bq), heads, head_dim);
    if (global_q && q->shape[0] != windows->shape[0]) {
        // One set of global queries per image, repeated across its windows.
        q = repeat_rows(q, windows->shape[0] / q->shape[0]);
    }
    const Tensor k = split_heads(linear(x_norm, blk.wk, blk.bk), heads, head_dim);
    const Tensor v = split_heads(linear(x_norm, blk.wv, blk.bv), heads, head_dim);

    // Bias [heads, T, T] from the relative offset table.
    const Tensor bias = permute(reshape(embedding(blk.bias_table, bias_index), {t, t, heads}),
                                {2, 0, 1});
    const Tensor g = global_token_attention(q, k, v, bias, static_cast<float>(head_dim));
    const Tensor attn_out = linear(merge_heads(g), blk.wproj, blk.bproj);

    Tensor x = add(windows, attn_out);
    const Tensor h = layernorm(x, blk.norm2_g, blk.norm2_b);
    const Tensor mlp = linear(gelu(linear(h, blk.mlp_w1, blk.mlp_b1)), blk.mlp_w2, blk.mlp_b2);
    return add(x, mlp);
}

Tensor Cgcvit::run_stage(Stream& stream, int stage_idx, Tensor fmap, int batch) {
    Stage& stage = stream.stages[static_cast<std::size_t>(stage_idx)];
    const int dim = cfg_.stage_dims[static_cast<std::size_t>(stage_idx)];
    const int heads = cfg_.num_heads[static_cast<std::size_t>(stage_idx)];
    const int res = cfg_.stage_resolution(stage_idx);
    const int w = std::min(cfg_.window_sizes[static_cast<std::size_t>(stage_idx)], res);
    const int nw_side = res / w;
    const int nw = nw_side * nw_side;
    const auto& bias_index = bias_indices_[static_cast<std::size_t>(stage_idx)];

    // Global query tokens: average-pool the stage map to w x w, then project.
    const int pool = res / w;
    Tensor pooled = fmap;  // [B, res, res, C]
    if (pool > 1) {
        pooled = reshape(pooled, {batch, w, pool, w, pool, dim});
        pooled = mean_axis(mean_axis(pooled, 4), 2);  // [B, w, w, C]
    }
    Tensor global_tokens =
        gelu(linear(reshape(pooled, {batch, w * w, dim}), stage.token_gen_w, stage.token_gen_b));

    // Window partition: [B, res, res, C] -> [B*nw, w*w, C].
    Tensor windows = reshape(fmap, {batch, nw_side, w, nw_side, w, dim});
    windows = permute(windows, {0, 1, 3, 2, 4, 5});
    windows = reshape(windows, {batch * nw, w * w, dim});

    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
        const bool is_global = b % 2 == 1;
        windows = block_attention(stage.blocks[b], windows, is_global ? global_tokens : nullptr,
                                  dim, heads, w, bias_index);
    }

    // Merge windows back to the spatial map.
    Tensor out = reshape(windows, {batch, nw_side, nw_side, w, w, dim});
    out = permute(out, {0, 1, 3, 2, 4, 5});
    out = reshape(out, {batch, res, res, dim});

    if (stage_idx < 3) {
        // 2x2 average pool then project to the next stage width.
        const int half = res / 2;
        out = reshape(out, {batch, half, 2, half, 2, dim});
        out = mean_axis(mean_axis(out, 4), 2);
        out = linear(reshape(out, {batch, half * half, dim}), stage.down_w, stage.down_b);
        out = reshape(out, {batch, half, half, cfg_.stage_dims[static_cast<std::size_t>(stage_idx) + 1]});
    }
    return out;
}

Tensor Cgcvit::stream_forward(const Tensor& chips, int stream_idx) {
    Stream& stream = streams_[static_cast<std::size_t>(stream_idx)];
    const int s = cfg_.chip_size, p = cfg_.patch_size;
    if (chips->shape.size() != 4 || chips->shape[1] != s || chips->shape[2] != s ||
        chips->shape[3] != 3)
        throw NnError("stream_forward: chips must be [B," + std::to_string(s) + "," +
                      std::to_string(s) + ",3], got " + shape_str(chips->shape));
    const int batch = chips->shape[0];
    const int res = s / p;

    // Patchify: [B, res, p, res, p, 3] -> [B, res*res, p*p*3].
    Tensor x = reshape(chips, {batch, res, p, res, p, 3});
    x = permute(x, {0, 1, 3, 2, 4, 5});
    x = reshape(x, {batch, res * res, p * p * 3});
    x = add(matmul(x, stream.patch_w), stream.patch_b);
    x = reshape(x, {batch, res, res, cfg_.stage_dims[0]});

    for (int stage = 0; stage < 4; ++stage) x = run_stage(stream, stage, x, batch);

    // x: [B, r4, r4, C4] -> layernorm, then global average pool.
    const int r4 = cfg_.stage_resolution(3);
    x = reshape(x, {batch, r4 * r4, cfg_.stage_dims[3]});
    x = layernorm(x, stream.final_norm_g, stream.final_norm_b);
    return mean_axis(x, 1);  // [B, C4]
}

std::map<Task, Tensor> Cgcvit::fuse_and_classify(Tensor top_feature, Tensor facade_feature,
                                                 int batch) {
    if (!top_feature) top_feature = tile_rows(streams_[0].placeholder, batch);
    if (!facade_feature) facade_feature = tile_rows(streams_[1].placeholder, batch);
    if (top_feature->shape != facade_feature->shape)
        throw NnError("fuse_and_classify: stream feature shape mismatch");
    const Tensor fused = concat_last(top_feature, facade_feature);
    std::map<Task, Tensor> logits;
    for (Task t : kAllTasks) {
        const auto& [w, b] = heads_.at(t);
        logits[t] = add(matmul(fused, w), b);
    }
    return logits;
}

std::map<Task, Tensor> Cgcvit::forward(const Tensor& top_chips, const Tensor& facade_chips,
                                       Modality modality) {
    Tensor top_feat, facade_feat;
    int batch = 0;
    if (modality != Modality::SvOnly) {
        top_feat = stream_forward(top_chips, 0);
        batch = top_feat->shape[0];
    }
    if (modality != Modality::UavOnly) {
        facade_feat = stream_forward(facade_chips, 1);
        batch = facade_feat->shape[0];
    }
    return fuse_and_classify(top_feat, facade_feat, batch);
}

}  // namespace crossview::model
