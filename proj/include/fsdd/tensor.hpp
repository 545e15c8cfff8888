#pragma once

// Reverse-mode autodiff over dense row-major tensors. A TapeT records one
// closure per executed primitive; backward() seeds d(loss)/d(loss)=1 and
// replays the tape in reverse, so every node is visited exactly once and
// always after its consumers. Ops accept tape == nullptr for inference-only
// forwards (nothing recorded, no gradients).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsdd/check.hpp"
#include "fsdd/kernels.hpp"

namespace fsdd {

template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until backward touches this tensor
    bool requires_grad = false;

    TensorT() = default;
    TensorT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        values.assign(count(shape), fill);
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            check(d > 0, "tensor extent must be positive");
            n *= d;
        }
        return n;
    }

    int64_t size() const { return static_cast<int64_t>(values.size()); }
    bool is_scalar() const { return size() == 1; }

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), T(0));
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    bool all_finite() const {
        for (T v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

template <typename T>
using TensorPtrT = std::shared_ptr<TensorT<T>>;

template <typename T>
TensorPtrT<T> make_tensor(std::vector<int> shape, T fill = T(0)) {
    return std::make_shared<TensorT<T>>(std::move(shape), fill);
}

template <typename T>
TensorPtrT<T> make_tensor(std::vector<int> shape, std::vector<T> values) {
    auto t = std::make_shared<TensorT<T>>();
    t->shape = std::move(shape);
    check(TensorT<T>::count(t->shape) == static_cast<int64_t>(values.size()),
          "tensor values do not match shape");
    t->values = std::move(values);
    return t;
}

template <typename T>
TensorPtrT<T> make_scalar(T v) {
    return make_tensor<T>({1}, std::vector<T>{v});
}

template <typename T>
class TapeT {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    // Populates grads of every requires_grad ancestor of `loss`.
    void backward(const TensorPtrT<T>& loss) {
        check(loss != nullptr && loss->is_scalar(), "backward: loss must be a scalar tensor");
        loss->ensure_grad();
        loss->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const TensorPtrT<T>*> xs) {
    for (auto* x : xs)
        if (*x && (*x)->requires_grad) return true;
    return false;
}

// Output grad missing means zero: allocate input grads (so every touched
// parameter ends the episode with a buffer) but skip the arithmetic.
template <typename T>
bool prepare_backward(const TensorPtrT<T>& out, std::initializer_list<TensorPtrT<T>> ins) {
    for (auto& in : ins)
        if (in && in->requires_grad) in->ensure_grad();
    return !out->grad.empty();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

template <typename T>
TensorPtrT<T> conv2d(TapeT<T>* tape, const TensorPtrT<T>& x, const TensorPtrT<T>& k,
                     const TensorPtrT<T>& b, int stride, int pad) {
    check(x->shape.size() == 3, "conv2d: input must be [C,H,W]");
    check(k->shape.size() == 4, "conv2d: kernel must be [Cout,Cin,kh,kw]");
    check(b->shape.size() == 1, "conv2d: bias must be [Cout]");
    kernels::Conv2dShape s;
    s.c_in = x->shape[0];
    s.h_in = x->shape[1];
    s.w_in = x->shape[2];
    s.c_out = k->shape[0];
    s.kh = k->shape[2];
    s.kw = k->shape[3];
    s.stride = stride;
    s.pad = pad;
    check(k->shape[1] == s.c_in, "conv2d: kernel Cin " + std::to_string(k->shape[1]) +
                                     " != input C " + std::to_string(s.c_in));
    check(b->shape[0] == s.c_out, "conv2d: bias length != Cout");
    s.validate();

    auto out = make_tensor<T>({s.c_out, s.h_out(), s.w_out()});
    kernels::conv2d_forward(x->values.data(), k->values.data(), b->values.data(),
                            out->values.data(), s);
    if (!out->all_finite()) throw std::runtime_error("conv2d: non-finite output");

    out->requires_grad = detail::any_requires_grad<T>({&x, &k, &b});
    if (tape && out->requires_grad) {
        tape->record([x, k, b, out, s]() {
            if (!detail::prepare_backward(out, {x, k, b})) return;
            if (x->requires_grad)
                kernels::conv2d_backward_input(k->values.data(), out->grad.data(), x->grad.data(),
                                               s);
            if (k->requires_grad || b->requires_grad)
                kernels::conv2d_backward_kernel(
                    x->values.data(), out->grad.data(),
                    k->requires_grad ? k->grad.data() : nullptr,
                    b->requires_grad ? b->grad.data() : nullptr, s);
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> relu(TapeT<T>* tape, const TensorPtrT<T>& x) {
    auto out = make_tensor<T>(x->shape);
    for (int64_t i = 0; i < x->size(); ++i) out->values[i] = x->values[i] > T(0) ? x->values[i] : T(0);
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (int64_t i = 0; i < x->size(); ++i)
                if (x->values[i] > T(0)) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> add(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    check(a->shape == b->shape, "add: shape mismatch");
    auto out = make_tensor<T>(a->shape);
    for (int64_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] + b->values[i];
    out->requires_grad = detail::any_requires_grad<T>({&a, &b});
    if (tape && out->requires_grad) {
        tape->record([a, b, out]() {
            if (!detail::prepare_backward(out, {a, b})) return;
            if (a->requires_grad)
                for (int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
            if (b->requires_grad)
                for (int64_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> sub(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    check(a->shape == b->shape, "sub: shape mismatch");
    auto out = make_tensor<T>(a->shape);
    for (int64_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] - b->values[i];
    out->requires_grad = detail::any_requires_grad<T>({&a, &b});
    if (tape && out->requires_grad) {
        tape->record([a, b, out]() {
            if (!detail::prepare_backward(out, {a, b})) return;
            if (a->requires_grad)
                for (int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
            if (b->requires_grad)
                for (int64_t i = 0; i < b->size(); ++i) b->grad[i] -= out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> mul_scalar(TapeT<T>* tape, const TensorPtrT<T>& x, T c) {
    auto out = make_tensor<T>(x->shape);
    for (int64_t i = 0; i < x->size(); ++i) out->values[i] = x->values[i] * c;
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out, c]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += c * out->grad[i];
        });
    }
    return out;
}

// Per-channel rescale: out[c,y,x] = F[c,y,x] * w[c].
template <typename T>
TensorPtrT<T> channel_scale(TapeT<T>* tape, const TensorPtrT<T>& f, const TensorPtrT<T>& w) {
    check(f->shape.size() == 3, "channel_scale: feature must be [m,H,W]");
    check(w->shape.size() == 1, "channel_scale: weights must be [m]");
    check(f->shape[0] == w->shape[0], "channel_scale: channel count mismatch (" +
                                          std::to_string(f->shape[0]) + " vs " +
                                          std::to_string(w->shape[0]) + ")");
    const int m = f->shape[0];
    const int64_t hw = static_cast<int64_t>(f->shape[1]) * f->shape[2];
    auto out = make_tensor<T>(f->shape);
    for (int c = 0; c < m; ++c) {
        const T wc = w->values[c];
        for (int64_t i = 0; i < hw; ++i) out->values[c * hw + i] = f->values[c * hw + i] * wc;
    }
    out->requires_grad = detail::any_requires_grad<T>({&f, &w});
    if (tape && out->requires_grad) {
        tape->record([f, w, out, m, hw]() {
            if (!detail::prepare_backward(out, {f, w})) return;
            for (int c = 0; c < m; ++c) {
                if (f->requires_grad) {
                    const T wc = w->values[c];
                    for (int64_t i = 0; i < hw; ++i) f->grad[c * hw + i] += wc * out->grad[c * hw + i];
                }
                if (w->requires_grad) {
                    T acc = 0;
                    for (int64_t i = 0; i < hw; ++i) acc += f->values[c * hw + i] * out->grad[c * hw + i];
                    w->grad[c] += acc;
                }
            }
        });
    }
    return out;
}

// 2x2 max pool, stride 2. Ties resolve to the first element in row-major
// order so gradients are deterministic.
template <typename T>
TensorPtrT<T> maxpool2(TapeT<T>* tape, const TensorPtrT<T>& x) {
    check(x->shape.size() == 3, "maxpool2: input must be [C,H,W]");
    const int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    check(h % 2 == 0 && w % 2 == 0, "maxpool2: extents must be even, got " + std::to_string(h) +
                                        "x" + std::to_string(w));
    const int ho = h / 2, wo = w / 2;
    auto out = make_tensor<T>({c, ho, wo});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c) * ho * wo);
    for (int ch = 0; ch < c; ++ch) {
        const T* in_c = x->values.data() + static_cast<size_t>(ch) * h * w;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                int64_t best = static_cast<int64_t>(2 * oy) * w + 2 * ox;
                T bv = in_c[best];
                const int64_t cand[3] = {best + 1, best + w, best + w + 1};
                for (int64_t idx : cand)
                    if (in_c[idx] > bv) {
                        bv = in_c[idx];
                        best = idx;
                    }
                const size_t o = (static_cast<size_t>(ch) * ho + oy) * wo + ox;
                out->values[o] = bv;
                (*argmax)[o] = static_cast<int64_t>(ch) * h * w + best;
            }
    }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out, argmax]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (size_t o = 0; o < argmax->size(); ++o) x->grad[(*argmax)[o]] += out->grad[o];
        });
    }
    return out;
}

// Nearest-neighbor 2x upsampling; backward sums the four replicas.
template <typename T>
TensorPtrT<T> upsample2_nearest(TapeT<T>* tape, const TensorPtrT<T>& x) {
    check(x->shape.size() == 3, "upsample2: input must be [C,H,W]");
    const int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    auto out = make_tensor<T>({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < w; ++x2) {
                const T v = x->values[(static_cast<size_t>(ch) * h + y) * w + x2];
                T* o = out->values.data() + (static_cast<size_t>(ch) * 2 * h + 2 * y) * 2 * w + 2 * x2;
                o[0] = v;
                o[1] = v;
                o[2 * w] = v;
                o[2 * w + 1] = v;
            }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out, c, h, w]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int x2 = 0; x2 < w; ++x2) {
                        const T* g = out->grad.data() +
                                     (static_cast<size_t>(ch) * 2 * h + 2 * y) * 2 * w + 2 * x2;
                        x->grad[(static_cast<size_t>(ch) * h + y) * w + x2] +=
                            g[0] + g[1] + g[2 * w] + g[2 * w + 1];
                    }
        });
    }
    return out;
}

// Spatial global max per channel: [C,H,W] -> [C].
template <typename T>
TensorPtrT<T> global_maxpool(TapeT<T>* tape, const TensorPtrT<T>& x) {
    check(x->shape.size() == 3, "global_maxpool: input must be [C,H,W]");
    const int c = x->shape[0];
    const int64_t hw = static_cast<int64_t>(x->shape[1]) * x->shape[2];
    auto out = make_tensor<T>({c});
    auto argmax = std::make_shared<std::vector<int64_t>>(c);
    for (int ch = 0; ch < c; ++ch) {
        const T* in_c = x->values.data() + ch * hw;
        int64_t best = 0;
        for (int64_t i = 1; i < hw; ++i)
            if (in_c[i] > in_c[best]) best = i;
        out->values[ch] = in_c[best];
        (*argmax)[ch] = ch * hw + best;
    }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out, argmax]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (size_t ch = 0; ch < argmax->size(); ++ch) x->grad[(*argmax)[ch]] += out->grad[ch];
        });
    }
    return out;
}

// Dense layer: out = W x + b, x:[n], W:[k,n], b:[k].
template <typename T>
TensorPtrT<T> linear(TapeT<T>* tape, const TensorPtrT<T>& x, const TensorPtrT<T>& w,
                     const TensorPtrT<T>& b) {
    check(x->shape.size() == 1 && w->shape.size() == 2 && b->shape.size() == 1,
          "linear: expects x [n], W [k,n], b [k]");
    const int n = x->shape[0], k = w->shape[0];
    check(w->shape[1] == n, "linear: W columns != input length");
    check(b->shape[0] == k, "linear: bias length != W rows");
    auto out = make_tensor<T>({k});
    for (int j = 0; j < k; ++j) {
        T acc = b->values[j];
        const T* wr = w->values.data() + static_cast<size_t>(j) * n;
        for (int i = 0; i < n; ++i) acc += wr[i] * x->values[i];
        out->values[j] = acc;
    }
    out->requires_grad = detail::any_requires_grad<T>({&x, &w, &b});
    if (tape && out->requires_grad) {
        tape->record([x, w, b, out, n, k]() {
            if (!detail::prepare_backward(out, {x, w, b})) return;
            for (int j = 0; j < k; ++j) {
                const T g = out->grad[j];
                if (g == T(0)) continue;
                const T* wr = w->values.data() + static_cast<size_t>(j) * n;
                if (x->requires_grad)
                    for (int i = 0; i < n; ++i) x->grad[i] += wr[i] * g;
                if (w->requires_grad) {
                    T* wg = w->grad.data() + static_cast<size_t>(j) * n;
                    for (int i = 0; i < n; ++i) wg[i] += x->values[i] * g;
                }
                if (b->requires_grad) b->grad[j] += g;
            }
        });
    }
    return out;
}

// Exp-normalization with max subtraction.
template <typename T>
TensorPtrT<T> softmax(TapeT<T>* tape, const TensorPtrT<T>& x) {
    check(x->shape.size() == 1 && x->shape[0] >= 1, "softmax: expects a nonempty vector");
    if (!x->all_finite()) throw std::runtime_error("softmax: non-finite logits");
    const int k = x->shape[0];
    auto out = make_tensor<T>({k});
    T mx = x->values[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, x->values[i]);
    T sum = 0;
    for (int i = 0; i < k; ++i) {
        out->values[i] = std::exp(x->values[i] - mx);
        sum += out->values[i];
    }
    for (int i = 0; i < k; ++i) out->values[i] /= sum;
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out, k]() {
            if (!detail::prepare_backward(out, {x})) return;
            T dot = 0;
            for (int i = 0; i < k; ++i) dot += out->grad[i] * out->values[i];
            for (int i = 0; i < k; ++i) x->grad[i] += out->values[i] * (out->grad[i] - dot);
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> sigmoid(TapeT<T>* tape, const TensorPtrT<T>& x) {
    auto out = make_tensor<T>(x->shape);
    for (int64_t i = 0; i < x->size(); ++i) out->values[i] = T(1) / (T(1) + std::exp(-x->values[i]));
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (int64_t i = 0; i < x->size(); ++i) {
                const T s = out->values[i];
                x->grad[i] += s * (T(1) - s) * out->grad[i];
            }
        });
    }
    return out;
}

// Squared Euclidean distance between two equal-length vectors; scalar output.
template <typename T>
TensorPtrT<T> sq_euclid(TapeT<T>* tape, const TensorPtrT<T>& a, const TensorPtrT<T>& b) {
    check(a->shape == b->shape, "sq_euclid: length mismatch");
    auto out = make_tensor<T>({1});
    T acc = 0;
    for (int64_t i = 0; i < a->size(); ++i) {
        const T d = a->values[i] - b->values[i];
        acc += d * d;
    }
    out->values[0] = acc;
    out->requires_grad = detail::any_requires_grad<T>({&a, &b});
    if (tape && out->requires_grad) {
        tape->record([a, b, out]() {
            if (!detail::prepare_backward(out, {a, b})) return;
            const T g = out->grad[0];
            for (int64_t i = 0; i < a->size(); ++i) {
                const T d = T(2) * (a->values[i] - b->values[i]) * g;
                if (a->requires_grad) a->grad[i] += d;
                if (b->requires_grad) b->grad[i] -= d;
            }
        });
    }
    return out;
}

// Elementwise mean of n same-shape tensors.
template <typename T>
TensorPtrT<T> mean_stack(TapeT<T>* tape, const std::vector<TensorPtrT<T>>& xs) {
    check(!xs.empty(), "mean_stack: empty input");
    for (const auto& x : xs) check(x->shape == xs[0]->shape, "mean_stack: shape mismatch");
    auto out = make_tensor<T>(xs[0]->shape);
    const T inv = T(1) / static_cast<T>(xs.size());
    for (const auto& x : xs)
        for (int64_t i = 0; i < x->size(); ++i) out->values[i] += x->values[i];
    for (int64_t i = 0; i < out->size(); ++i) out->values[i] *= inv;
    out->requires_grad = false;
    for (const auto& x : xs) out->requires_grad = out->requires_grad || x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([xs, out, inv]() {
            bool any = false;
            for (const auto& x : xs)
                if (x->requires_grad) {
                    x->ensure_grad();
                    any = true;
                }
            if (!any || out->grad.empty()) return;
            for (const auto& x : xs)
                if (x->requires_grad)
                    for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += inv * out->grad[i];
        });
    }
    return out;
}

// Gathers n scalar tensors into one [n] vector.
template <typename T>
TensorPtrT<T> concat_scalars(TapeT<T>* tape, const std::vector<TensorPtrT<T>>& xs) {
    check(!xs.empty(), "concat_scalars: empty input");
    auto out = make_tensor<T>({static_cast<int>(xs.size())});
    for (size_t i = 0; i < xs.size(); ++i) {
        check(xs[i]->is_scalar(), "concat_scalars: inputs must be scalars");
        out->values[i] = xs[i]->values[0];
        out->requires_grad = out->requires_grad || xs[i]->requires_grad;
    }
    if (tape && out->requires_grad) {
        tape->record([xs, out]() {
            for (const auto& x : xs)
                if (x->requires_grad) x->ensure_grad();
            if (out->grad.empty()) return;
            for (size_t i = 0; i < xs.size(); ++i)
                if (xs[i]->requires_grad) xs[i]->grad[0] += out->grad[i];
        });
    }
    return out;
}

// out[j] = x[idx[j]] over the flattened buffer; backward scatter-adds.
template <typename T>
TensorPtrT<T> gather(TapeT<T>* tape, const TensorPtrT<T>& x, const std::vector<int64_t>& idx) {
    check(!idx.empty(), "gather: empty index list");
    auto out = make_tensor<T>({static_cast<int>(idx.size())});
    for (size_t j = 0; j < idx.size(); ++j) {
        check(idx[j] >= 0 && idx[j] < x->size(), "gather: index out of range");
        out->values[j] = x->values[idx[j]];
    }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        auto indices = std::make_shared<std::vector<int64_t>>(idx);
        tape->record([x, out, indices]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (size_t j = 0; j < indices->size(); ++j) x->grad[(*indices)[j]] += out->grad[j];
        });
    }
    return out;
}

// Flatten to [n]; identity on values, identity gradient.
template <typename T>
TensorPtrT<T> flatten(TapeT<T>* tape, const TensorPtrT<T>& x) {
    auto out = make_tensor<T>({static_cast<int>(x->size())});
    out->values = x->values;
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> sum_all(TapeT<T>* tape, const TensorPtrT<T>& x) {
    auto out = make_tensor<T>({1});
    out->values[0] = std::accumulate(x->values.begin(), x->values.end(), T(0));
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([x, out]() {
            if (!detail::prepare_backward(out, {x})) return;
            for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0];
        });
    }
    return out;
}

template <typename T>
TensorPtrT<T> mean_all(TapeT<T>* tape, const TensorPtrT<T>& x) {
    auto s = sum_all(tape, x);
    return mul_scalar(tape, s, T(1) / static_cast<T>(x->size()));
}

// Mean binary cross-entropy of probabilities against constant 0/1 targets.
// Probabilities are clamped to [eps, 1-eps]; clamped entries get zero grad.
template <typename T>
TensorPtrT<T> bce_mean(TapeT<T>* tape, const TensorPtrT<T>& p, const std::vector<T>& targets,
                       T eps = T(1e-6)) {
    check(p->shape.size() == 1 && static_cast<size_t>(p->shape[0]) == targets.size(),
          "bce_mean: prediction/target length mismatch");
    const int n = p->shape[0];
    auto out = make_tensor<T>({1});
    T acc = 0;
    for (int i = 0; i < n; ++i) {
        const T ph = std::clamp(p->values[i], eps, T(1) - eps);
        acc += -(targets[i] * std::log(ph) + (T(1) - targets[i]) * std::log(T(1) - ph));
    }
    out->values[0] = acc / static_cast<T>(n);
    out->requires_grad = p->requires_grad;
    if (tape && out->requires_grad) {
        auto tgt = std::make_shared<std::vector<T>>(targets);
        tape->record([p, out, tgt, eps, n]() {
            if (!detail::prepare_backward(out, {p})) return;
            const T g = out->grad[0] / static_cast<T>(n);
            for (int i = 0; i < n; ++i) {
                if (p->values[i] <= eps || p->values[i] >= T(1) - eps) continue;
                const T ph = p->values[i];
                p->grad[i] += g * (ph - (*tgt)[i]) / (ph * (T(1) - ph));
            }
        });
    }
    return out;
}

// Mean smooth-L1 of (x - target): 0.5 e^2 for |e| < 1, |e| - 0.5 otherwise.
template <typename T>
TensorPtrT<T> smooth_l1_mean(TapeT<T>* tape, const TensorPtrT<T>& x, const std::vector<T>& targets) {
    check(x->shape.size() == 1 && static_cast<size_t>(x->shape[0]) == targets.size(),
          "smooth_l1_mean: prediction/target length mismatch");
    const int n = x->shape[0];
    auto out = make_tensor<T>({1});
    T acc = 0;
    for (int i = 0; i < n; ++i) {
        const T e = x->values[i] - targets[i];
        const T a = std::abs(e);
        acc += a < T(1) ? T(0.5) * e * e : a - T(0.5);
    }
    out->values[0] = acc / static_cast<T>(n);
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        auto tgt = std::make_shared<std::vector<T>>(targets);
        tape->record([x, out, tgt, n]() {
            if (!detail::prepare_backward(out, {x})) return;
            const T g = out->grad[0] / static_cast<T>(n);
            for (int i = 0; i < n; ++i) {
                const T e = x->values[i] - (*tgt)[i];
                x->grad[i] += g * (std::abs(e) < T(1) ? e : (e > T(0) ? T(1) : T(-1)));
            }
        });
    }
    return out;
}

// -log(max(p[idx], clamp)); gradient is zero when the pick sits at the clamp.
template <typename T>
TensorPtrT<T> neg_log_pick(TapeT<T>* tape, const TensorPtrT<T>& p, int idx, T clamp_lo = T(1e-12)) {
    check(p->shape.size() == 1, "neg_log_pick: expects a vector");
    check(idx >= 0 && idx < p->shape[0], "neg_log_pick: index out of range");
    auto out = make_tensor<T>({1});
    const T pv = std::max(p->values[idx], clamp_lo);
    out->values[0] = -std::log(pv);
    out->requires_grad = p->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([p, out, idx, clamp_lo]() {
            if (!detail::prepare_backward(out, {p})) return;
            if (p->values[idx] > clamp_lo) p->grad[idx] += -out->grad[0] / p->values[idx];
        });
    }
    return out;
}

// Max pool over a 4x4 grid of near-equal bins covering the half-open
// feature-space rectangle [x0,x1) x [y0,y1). Tiny boxes snap to one cell.
template <typename T>
TensorPtrT<T> roi_maxpool(TapeT<T>* tape, const TensorPtrT<T>& f, int x0, int y0, int x1, int y1,
                          int out_side = 4) {
    check(f->shape.size() == 3, "roi_maxpool: feature must be [m,H,W]");
    const int m = f->shape[0], h = f->shape[1], w = f->shape[2];
    check(x0 >= 0 && y0 >= 0 && x1 > x0 && y1 > y0 && x1 <= w && y1 <= h,
          "roi_maxpool: bin rectangle out of bounds");
    const int bh = y1 - y0, bw = x1 - x0;
    auto out = make_tensor<T>({m, out_side, out_side});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(m) * out_side * out_side);
    for (int c = 0; c < m; ++c) {
        const T* fc = f->values.data() + static_cast<size_t>(c) * h * w;
        for (int by = 0; by < out_side; ++by) {
            int ys = y0 + (by * bh) / out_side;
            int ye = y0 + ((by + 1) * bh) / out_side;
            if (ye <= ys) ye = ys + 1;
            for (int bx = 0; bx < out_side; ++bx) {
                int xs = x0 + (bx * bw) / out_side;
                int xe = x0 + ((bx + 1) * bw) / out_side;
                if (xe <= xs) xe = xs + 1;
                int64_t best = static_cast<int64_t>(ys) * w + xs;
                T bv = fc[best];
                for (int y = ys; y < ye; ++y)
                    for (int x = xs; x < xe; ++x) {
                        const int64_t i = static_cast<int64_t>(y) * w + x;
                        if (fc[i] > bv) {
                            bv = fc[i];
                            best = i;
                        }
                    }
                const size_t o = (static_cast<size_t>(c) * out_side + by) * out_side + bx;
                out->values[o] = bv;
                (*argmax)[o] = static_cast<int64_t>(c) * h * w + best;
            }
        }
    }
    out->requires_grad = f->requires_grad;
    if (tape && out->requires_grad) {
        tape->record([f, out, argmax]() {
            if (!detail::prepare_backward(out, {f})) return;
            for (size_t o = 0; o < argmax->size(); ++o) f->grad[(*argmax)[o]] += out->grad[o];
        });
    }
    return out;
}

}  // namespace fsdd
