#include "crossview/nn/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace crossview::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

long shape_numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor make_tensor(Shape shape, bool requires_grad, std::string name) {
    auto t = std::make_shared<Node>();
    t->shape = std::move(shape);
    t->value.assign(static_cast<std::size_t>(shape_numel(t->shape)), 0.0f);
    t->requires_grad = requires_grad;
    t->name = std::move(name);
    return t;
}

Tensor from_values(Shape shape, std::vector<float> values, bool requires_grad, std::string name) {
    if (static_cast<long>(values.size()) != shape_numel(shape))
        throw NnError("from_values: size mismatch for " + shape_str(shape));
    auto t = std::make_shared<Node>();
    t->shape = std::move(shape);
    t->value = std::move(values);
    t->requires_grad = requires_grad;
    t->name = std::move(name);
    return t;
}

namespace {

bool any_parent_grad(const std::vector<Tensor>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad || p->backward_fn) return true;
    return false;
}

Tensor make_op(Shape shape, std::vector<Tensor> parents, std::function<void(Node&)> backward_fn) {
    auto t = make_tensor(std::move(shape));
    t->parents = std::move(parents);
    if (any_parent_grad(t->parents)) t->backward_fn = std::move(backward_fn);
    return t;
}

void topo_sort(Node* node, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
    if (seen.count(node)) return;
    seen.insert(node);
    for (const auto& p : node->parents) topo_sort(p.get(), seen, order);
    order.push_back(node);
}

}  // namespace

void backward(const Tensor& root, const std::vector<float>* seed) {
    std::unordered_set<Node*> seen;
    std::vector<Node*> order;
    topo_sort(root.get(), seen, order);
    for (Node* n : order) n->ensure_grad();
    if (seed) {
        if (seed->size() != root->value.size()) throw NnError("backward: bad seed size");
        root->grad = *seed;
    } else {
        if (root->numel() != 1) throw NnError("backward: non-scalar root needs a seed");
        root->grad[0] = 1.0f;
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    const long an = a->numel(), bn = b->numel();
    if (an % bn != 0) throw NnError("add: incompatible " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    // Suffix check.
    if (b->shape.size() > a->shape.size()) throw NnError("add: b has more dims than a");
    for (std::size_t i = 0; i < b->shape.size(); ++i)
        if (b->shape[b->shape.size() - 1 - i] != a->shape[a->shape.size() - 1 - i])
            throw NnError("add: b is not a trailing suffix of a");
    auto out = make_op(a->shape, {a, b}, [a, b, bn](Node& self) {
        if (a->requires_grad || a->backward_fn)
            for (long i = 0; i < self.numel(); ++i) a->grad[static_cast<std::size_t>(i)] += self.grad[static_cast<std::size_t>(i)];
        if (b->requires_grad || b->backward_fn)
            for (long i = 0; i < self.numel(); ++i)
                b->grad[static_cast<std::size_t>(i % bn)] += self.grad[static_cast<std::size_t>(i)];
    });
    for (long i = 0; i < an; ++i)
        out->value[static_cast<std::size_t>(i)] =
            a->value[static_cast<std::size_t>(i)] + b->value[static_cast<std::size_t>(i % bn)];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, mul_scalar(b, -1.0f)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a->shape != b->shape) throw NnError("mul: shape mismatch");
    auto out = make_op(a->shape, {a, b}, [a, b](Node& self) {
        for (long i = 0; i < self.numel(); ++i) {
            const auto u = static_cast<std::size_t>(i);
            if (a->requires_grad || a->backward_fn) a->grad[u] += self.grad[u] * b->value[u];
            if (b->requires_grad || b->backward_fn) b->grad[u] += self.grad[u] * a->value[u];
        }
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] * b->value[i];
    return out;
}

Tensor add_scalar(const Tensor& a, float s) {
    auto out = make_op(a->shape, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i) a->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] + s;
    return out;
}

Tensor mul_scalar(const Tensor& a, float s) {
    auto out = make_op(a->shape, {a}, [a, s](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i) a->grad[i] += self.grad[i] * s;
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] * s;
    return out;
}

Tensor exp_t(const Tensor& a) {
    auto out = make_op(a->shape, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i)
            a->grad[i] += self.grad[i] * self.value[i];
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = std::exp(a->value[i]);
    return out;
}

Tensor log_t(const Tensor& a) {
    auto out = make_op(a->shape, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i)
            a->grad[i] += self.grad[i] / a->value[i];
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = std::log(a->value[i]);
    return out;
}

Tensor pow_scalar(const Tensor& a, float exponent) {
    auto out = make_op(a->shape, {a}, [a, exponent](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            const float x = a->value[i];
            const float d = exponent == 0.0f
                                ? 0.0f
                                : exponent * std::pow(std::max(x, 1e-12f), exponent - 1.0f);
            a->grad[i] += self.grad[i] * d;
        }
    });
    for (std::size_t i = 0; i < out->value.size(); ++i)
        out->value[i] = std::pow(a->value[i], exponent);
    return out;
}

Tensor relu(const Tensor& a) {
    auto out = make_op(a->shape, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i)
            if (a->value[i] > 0.0f) a->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = std::max(0.0f, a->value[i]);
    return out;
}

Tensor gelu(const Tensor& a) {
    constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
    constexpr float kA = 0.044715f;
    auto out = make_op(a->shape, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            const float x = a->value[i];
            const float u = kC * (x + kA * x * x * x);
            const float t = std::tanh(u);
            const float du = kC * (1.0f + 3.0f * kA * x * x);
            const float d = 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
            a->grad[i] += self.grad[i] * d;
        }
    });
    for (std::size_t i = 0; i < out->value.size(); ++i) {
        const float x = a->value[i];
        out->value[i] = 0.5f * x * (1.0f + std::tanh(kC * (x + kA * x * x * x)));
    }
    return out;
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a->shape.size() < 2 || b->shape.size() < 2) throw NnError("matmul: need >= 2 dims");
    const int m = a->shape[a->shape.size() - 2];
    const int k = a->shape.back();
    const int bk = transpose_b ? b->shape.back() : b->shape[b->shape.size() - 2];
    const int n = transpose_b ? b->shape[b->shape.size() - 2] : b->shape.back();
    if (bk != k)
        throw NnError("matmul: inner dim mismatch " + shape_str(a->shape) + " x " +
                      shape_str(b->shape));
    long batch = 1;
    for (std::size_t i = 0; i + 2 < a->shape.size(); ++i) batch *= a->shape[i];
    const bool b_batched = b->shape.size() > 2;
    if (b_batched) {
        long bbatch = 1;
        for (std::size_t i = 0; i + 2 < b->shape.size(); ++i) bbatch *= b->shape[i];
        if (bbatch != batch) throw NnError("matmul: batch mismatch");
    }

    Shape out_shape(a->shape.begin(), a->shape.end() - 1);
    out_shape.push_back(n);
    auto out = make_tensor(out_shape);
    out->parents = {a, b};

    const long a_stride = static_cast<long>(m) * k;
    const long b_stride = b_batched ? static_cast<long>(k) * n : 0;
    const long o_stride = static_cast<long>(m) * n;

    for (long bi = 0; bi < batch; ++bi) {
        CMapMat A(a->value.data() + bi * a_stride, m, k);
        MapMat O(out->value.data() + bi * o_stride, m, n);
        const float* bp = b->value.data() + bi * b_stride;
        if (transpose_b) {
            CMapMat B(bp, n, k);
            O.noalias() = A * B.transpose();
        } else {
            CMapMat B(bp, k, n);
            O.noalias() = A * B;
        }
    }

    if (any_parent_grad(out->parents)) {
        out->backward_fn = [a, b, m, k, n, batch, b_batched, a_stride, b_stride, o_stride,
                            transpose_b](Node& self) {
            const bool need_a = a->requires_grad || a->backward_fn;
            const bool need_b = b->requires_grad || b->backward_fn;
            for (long bi = 0; bi < batch; ++bi) {
                CMapMat G(self.grad.data() + bi * o_stride, m, n);
                CMapMat A(a->value.data() + bi * a_stride, m, k);
                const float* bp = b->value.data() + bi * b_stride;
                float* gbp = b->grad.data() + bi * b_stride;
                if (transpose_b) {
                    CMapMat B(bp, n, k);
                    if (need_a) {
                        MapMat GA(a->grad.data() + bi * a_stride, m, k);
                        GA.noalias() += G * B;
                    }
                    if (need_b) {
                        MapMat GB(gbp, n, k);
                        GB.noalias() += G.transpose() * A;
                    }
                } else {
                    CMapMat B(bp, k, n);
                    if (need_a) {
                        MapMat GA(a->grad.data() + bi * a_stride, m, k);
                        GA.noalias() += G * B.transpose();
                    }
                    if (need_b) {
                        MapMat GB(gbp, k, n);
                        GB.noalias() += A.transpose() * G;
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    long n = 1;
    int infer = -1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw NnError("reshape: multiple -1");
            infer = static_cast<int>(i);
        } else {
            n *= shape[i];
        }
    }
    if (infer >= 0) shape[static_cast<std::size_t>(infer)] = static_cast<int>(a->numel() / n);
    if (shape_numel(shape) != a->numel())
        throw NnError("reshape: numel mismatch " + shape_str(a->shape) + " -> " + shape_str(shape));
    auto out = make_op(shape, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < self.value.size(); ++i) a->grad[i] += self.grad[i];
    });
    out->value = a->value;
    return out;
}

Tensor permute(const Tensor& a, const std::vector<int>& dims) {
    const std::size_t nd = a->shape.size();
    if (dims.size() != nd) throw NnError("permute: rank mismatch");
    Shape out_shape(nd);
    for (std::size_t i = 0; i < nd; ++i) out_shape[i] = a->shape[static_cast<std::size_t>(dims[i])];

    std::vector<long> in_strides(nd, 1), out_strides(nd, 1);
    for (std::size_t i = nd - 1; i > 0; --i)
        in_strides[i - 1] = in_strides[i] * a->shape[i];
    for (std::size_t i = nd - 1; i > 0; --i)
        out_strides[i - 1] = out_strides[i] * out_shape[i];

    // For each output linear index, the source linear index.
    const long total = a->numel();
    auto src_index = std::make_shared<std::vector<long>>(static_cast<std::size_t>(total));
    std::vector<long> idx(nd, 0);
    for (long o = 0; o < total; ++o) {
        long rem = o;
        long src = 0;
        for (std::size_t i = 0; i < nd; ++i) {
            const long coord = rem / out_strides[i];
            rem %= out_strides[i];
            src += coord * in_strides[static_cast<std::size_t>(dims[i])];
        }
        (*src_index)[static_cast<std::size_t>(o)] = src;
    }

    auto out = make_op(out_shape, {a}, [a, src_index](Node& self) {
        for (std::size_t o = 0; o < self.value.size(); ++o)
            a->grad[static_cast<std::size_t>((*src_index)[o])] += self.grad[o];
    });
    for (std::size_t o = 0; o < out->value.size(); ++o)
        out->value[o] = a->value[static_cast<std::size_t>((*src_index)[o])];
    return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
    if (a->shape.size() != b->shape.size()) throw NnError("concat_last: rank mismatch");
    for (std::size_t i = 0; i + 1 < a->shape.size(); ++i)
        if (a->shape[i] != b->shape[i]) throw NnError("concat_last: leading dim mismatch");
    const int ca = a->shape.back(), cb = b->shape.back();
    Shape out_shape = a->shape;
    out_shape.back() = ca + cb;
    const long rows = a->numel() / ca;
    auto out = make_op(out_shape, {a, b}, [a, b, ca, cb, rows](Node& self) {
        for (long r = 0; r < rows; ++r) {
            for (int i = 0; i < ca; ++i)
                a->grad[static_cast<std::size_t>(r * ca + i)] +=
                    self.grad[static_cast<std::size_t>(r * (ca + cb) + i)];
            for (int i = 0; i < cb; ++i)
                b->grad[static_cast<std::size_t>(r * cb + i)] +=
                    self.grad[static_cast<std::size_t>(r * (ca + cb) + ca + i)];
        }
    });
    for (long r = 0; r < rows; ++r) {
        for (int i = 0; i < ca; ++i)
            out->value[static_cast<std::size_t>(r * (ca + cb) + i)] =
                a->value[static_cast<std::size_t>(r * ca + i)];
        for (int i = 0; i < cb; ++i)
            out->value[static_cast<std::size_t>(r * (ca + cb) + ca + i)] =
                b->value[static_cast<std::size_t>(r * cb + i)];
    }
    return out;
}

Tensor tile_rows(const Tensor& a, int n) {
    if (a->shape.size() != 1) throw NnError("tile_rows: expects a 1-D tensor");
    const int c = a->shape[0];
    auto out = make_op({n, c}, {a}, [a, n, c](Node& self) {
        for (int r = 0; r < n; ++r)
            for (int i = 0; i < c; ++i)
                a->grad[static_cast<std::size_t>(i)] +=
                    self.grad[static_cast<std::size_t>(r * c + i)];
    });
    for (int r = 0; r < n; ++r)
        for (int i = 0; i < c; ++i)
            out->value[static_cast<std::size_t>(r * c + i)] = a->value[static_cast<std::size_t>(i)];
    return out;
}

Tensor repeat_rows(const Tensor& a, int times) {
    if (a->shape.empty()) throw NnError("repeat_rows: scalar input");
    const int b = a->shape[0];
    const long slice = a->numel() / b;
    Shape out_shape = a->shape;
    out_shape[0] = b * times;
    auto out = make_op(out_shape, {a}, [a, b, times, slice](Node& self) {
        for (int r = 0; r < b; ++r)
            for (int t = 0; t < times; ++t)
                for (long i = 0; i < slice; ++i)
                    a->grad[static_cast<std::size_t>(r * slice + i)] +=
                        self.grad[static_cast<std::size_t>((r * times + t) * slice + i)];
    });
    for (int r = 0; r < b; ++r)
        for (int t = 0; t < times; ++t)
            for (long i = 0; i < slice; ++i)
                out->value[static_cast<std::size_t>((r * times + t) * slice + i)] =
                    a->value[static_cast<std::size_t>(r * slice + i)];
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void reduce_geometry(const Shape& shape, int axis, long& outer, long& mid, long& inner) {
    outer = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    mid = shape[static_cast<std::size_t>(axis)];
    inner = 1;
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
        inner *= shape[i];
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis) {
    if (axis < 0) axis += static_cast<int>(a->shape.size());
    if (axis < 0 || axis >= static_cast<int>(a->shape.size())) throw NnError("sum_axis: bad axis");
    long outer, mid, inner;
    reduce_geometry(a->shape, axis, outer, mid, inner);
    Shape out_shape;
    for (int i = 0; i < static_cast<int>(a->shape.size()); ++i)
        if (i != axis) out_shape.push_back(a->shape[static_cast<std::size_t>(i)]);
    if (out_shape.empty()) out_shape = {1};
    auto out = make_op(out_shape, {a}, [a, outer, mid, inner](Node& self) {
        for (long o = 0; o < outer; ++o)
            for (long m = 0; m < mid; ++m)
                for (long i = 0; i < inner; ++i)
                    a->grad[static_cast<std::size_t>((o * mid + m) * inner + i)] +=
                        self.grad[static_cast<std::size_t>(o * inner + i)];
    });
    for (long o = 0; o < outer; ++o)
        for (long i = 0; i < inner; ++i) {
            float s = 0.0f;
            for (long m = 0; m < mid; ++m)
                s += a->value[static_cast<std::size_t>((o * mid + m) * inner + i)];
            out->value[static_cast<std::size_t>(o * inner + i)] = s;
        }
    return out;
}

Tensor mean_axis(const Tensor& a, int axis) {
    if (axis < 0) axis += static_cast<int>(a->shape.size());
    const float inv = 1.0f / static_cast<float>(a->shape[static_cast<std::size_t>(axis)]);
    return mul_scalar(sum_axis(a, axis), inv);
}

Tensor sum_all(const Tensor& a) {
    auto out = make_op({1}, {a}, [a](Node& self) {
        for (std::size_t i = 0; i < a->value.size(); ++i) a->grad[i] += self.grad[0];
    });
    double s = 0.0;
    for (float v : a->value) s += v;
    out->value[0] = static_cast<float>(s);
    return out;
}

Tensor mean_all(const Tensor& a) {
    return mul_scalar(sum_all(a), 1.0f / static_cast<float>(a->numel()));
}

// ---------------------------------------------------------------------------

Tensor softmax_last(const Tensor& a) {
    const int c = a->shape.back();
    const long rows = a->numel() / c;
    auto out = make_tensor(a->shape);
    out->parents = {a};
    for (long r = 0; r < rows; ++r) {
        const float* x = a->value.data() + r * c;
        float* y = out->value.data() + r * c;
        float mx = x[0];
        for (int i = 1; i < c; ++i) mx = std::max(mx, x[i]);
        float denom = 0.0f;
        for (int i = 0; i < c; ++i) {
            y[i] = std::exp(x[i] - mx);
            denom += y[i];
        }
        for (int i = 0; i < c; ++i) y[i] /= denom;
    }
    if (any_parent_grad(out->parents)) {
        out->backward_fn = [a, rows, c](Node& self) {
            for (long r = 0; r < rows; ++r) {
                const float* y = self.value.data() + r * c;
                const float* g = self.grad.data() + r * c;
                float dotv = 0.0f;
                for (int i = 0; i < c; ++i) dotv += y[i] * g[i];
                for (int i = 0; i < c; ++i)
                    a->grad[static_cast<std::size_t>(r * c + i)] += y[i] * (g[i] - dotv);
            }
        };
    }
    return out;
}

Tensor log_softmax_last(const Tensor& a) {
    const int c = a->shape.back();
    const long rows = a->numel() / c;
    auto out = make_tensor(a->shape);
    out->parents = {a};
    for (long r = 0; r < rows; ++r) {
        const float* x = a->value.data() + r * c;
        float* y = out->value.data() + r * c;
        float mx = x[0];
        for (int i = 1; i < c; ++i) mx = std::max(mx, x[i]);
        double denom = 0.0;
        for (int i = 0; i < c; ++i) denom += std::exp(static_cast<double>(x[i] - mx));
        const float lse = mx + static_cast<float>(std::log(denom));
        for (int i = 0; i < c; ++i) y[i] = x[i] - lse;
    }
    if (any_parent_grad(out->parents)) {
        out->backward_fn = [a, rows, c](Node& self) {
            for (long r = 0; r < rows; ++r) {
                const float* y = self.value.data() + r * c;
                const float* g = self.grad.data() + r * c;
                float gsum = 0.0f;
                for (int i = 0; i < c; ++i) gsum += g[i];
                for (int i = 0; i < c; ++i)
                    a->grad[static_cast<std::size_t>(r * c + i)] += g[i] - std::exp(y[i]) * gsum;
            }
        };
    }
    return out;
}

Tensor layernorm(const Tensor& a, const Tensor& gamma, const Tensor& beta, float eps) {
    const int c = a->shape.back();
    if (gamma->numel() != c || beta->numel() != c) throw NnError("layernorm: affine size mismatch");
    const long rows = a->numel() / c;
    auto out = make_tensor(a->shape);
    out->parents = {a, gamma, beta};
    auto xhat = std::make_shared<std::vector<float>>(a->value.size());
    auto inv_sigma = std::make_shared<std::vector<float>>(static_cast<std::size_t>(rows));
    for (long r = 0; r < rows; ++r) {
        const float* x = a->value.data() + r * c;
        float* y = out->value.data() + r * c;
        double mu = 0.0;
        for (int i = 0; i < c; ++i) mu += x[i];
        mu /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) var += (x[i] - mu) * (x[i] - mu);
        var /= c;
        const float is = 1.0f / std::sqrt(static_cast<float>(var) + eps);
        (*inv_sigma)[static_cast<std::size_t>(r)] = is;
        for (int i = 0; i < c; ++i) {
            const float xh = (x[i] - static_cast<float>(mu)) * is;
            (*xhat)[static_cast<std::size_t>(r * c + i)] = xh;
            y[i] = xh * gamma->value[static_cast<std::size_t>(i)] +
                   beta->value[static_cast<std::size_t>(i)];
        }
    }
    if (any_parent_grad(out->parents)) {
        out->backward_fn = [a, gamma, beta, rows, c, xhat, inv_sigma](Node& self) {
            const bool need_a = a->requires_grad || a->backward_fn;
            for (long r = 0; r < rows; ++r) {
                const float* g = self.grad.data() + r * c;
                const float* xh = xhat->data() + r * c;
                const float is = (*inv_sigma)[static_cast<std::size_t>(r)];
                float sum_gg = 0.0f, sum_ggx = 0.0f;
                for (int i = 0; i < c; ++i) {
                    const float gg = g[i] * gamma->value[static_cast<std::size_t>(i)];
                    sum_gg += gg;
                    sum_ggx += gg * xh[i];
                    if (gamma->requires_grad)
                        gamma->grad[static_cast<std::size_t>(i)] += g[i] * xh[i];
                    if (beta->requires_grad) beta->grad[static_cast<std::size_t>(i)] += g[i];
                }
                if (need_a) {
                    const float inv_c = 1.0f / static_cast<float>(c);
                    for (int i = 0; i < c; ++i) {
                        const float gg = g[i] * gamma->value[static_cast<std::size_t>(i)];
                        a->grad[static_cast<std::size_t>(r * c + i)] +=
                            is * (gg - inv_c * sum_gg - xh[i] * inv_c * sum_ggx);
                    }
                }
            }
        };
    }
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& indices) {
    if (table->shape.size() != 2) throw NnError("embedding: table must be 2-D");
    const int v = table->shape[0], c = table->shape[1];
    const int n = static_cast<int>(indices.size());
    auto idx = std::make_shared<std::vector<int>>(indices);
    auto out = make_op({n, c}, {table}, [table, idx, c](Node& self) {
        for (std::size_t r = 0; r < idx->size(); ++r)
            for (int i = 0; i < c; ++i)
                table->grad[static_cast<std::size_t>((*idx)[r] * c + i)] +=
                    self.grad[r * static_cast<std::size_t>(c) + static_cast<std::size_t>(i)];
    });
    for (int r = 0; r < n; ++r) {
        const int row = indices[static_cast<std::size_t>(r)];
        if (row < 0 || row >= v) throw NnError("embedding: index out of range");
        for (int i = 0; i < c; ++i)
            out->value[static_cast<std::size_t>(r * c + i)] =
                table->value[static_cast<std::size_t>(row * c + i)];
    }
    return out;
}

}  // namespace crossview::nn
