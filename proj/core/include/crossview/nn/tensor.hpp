#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossview::nn {

class NnError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

long shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// One node of the autodiff tape. Values and gradients are dense row-major
/// float buffers; backward closures accumulate into parent gradients.
struct Node {
    std::vector<float> value;
    std::vector<float> grad;
    Shape shape;
    bool requires_grad = false;
    std::string name;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    long numel() const { return static_cast<long>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
    }
};

using Tensor = std::shared_ptr<Node>;

Tensor make_tensor(Shape shape, bool requires_grad = false, std::string name = {});
Tensor from_values(Shape shape, std::vector<float> values, bool requires_grad = false,
                   std::string name = {});

/// Reverse-mode sweep from `root` (seeds d(root)/d(root) = 1; root must be a
/// scalar unless seed is supplied).
void backward(const Tensor& root, const std::vector<float>* seed = nullptr);

// ---- arithmetic -----------------------------------------------------------

/// Elementwise a + b. b's shape must equal a's or be a trailing suffix of it
/// (bias-style broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // same-shape elementwise
Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor pow_scalar(const Tensor& a, float exponent);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);

/// a: [..., M, K]. b either [K, N] (shared weight) or batched with leading
/// dims equal to a's. transpose_b swaps b's last two dims.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& dims);
Tensor concat_last(const Tensor& a, const Tensor& b);
/// Repeats a 1-D tensor [C] into rows [n, C].
Tensor tile_rows(const Tensor& a, int n);
/// Repeats each leading-dim slice `times` times: [B, ...] -> [B*times, ...].
Tensor repeat_rows(const Tensor& a, int times);

// ---- reductions -----------------------------------------------------------

Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// ---- neural primitives ----------------------------------------------------

Tensor softmax_last(const Tensor& a);
Tensor log_softmax_last(const Tensor& a);
/// Layer norm over the last dim with affine parameters gamma/beta of [C].
Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
/// table: [V, C]; indices: flat row ids; result [n, C] with scatter-add grad.
Tensor embedding(const Tensor& table, const std::vector<int>& indices);

}  // namespace crossview::nn
