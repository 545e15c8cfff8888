#pragma once

// Direct 2-D convolution kernels (cross-correlation), the hot loops of the
// whole model. Each kernel comes in a serial reference variant and an
// OpenMP variant parallelized over disjoint output slices. Per-element
// accumulation order is identical in both, so results are bitwise equal
// for any thread count.

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fsdd::kernels {

struct Conv2dShape {
    int c_in = 0, h_in = 0, w_in = 0;
    int c_out = 0, kh = 0, kw = 0;
    int stride = 1, pad = 0;

    int h_out() const { return (h_in + 2 * pad - kh) / stride + 1; }
    int w_out() const { return (w_in + 2 * pad - kw) / stride + 1; }

    void validate() const {
        if (c_in <= 0 || h_in <= 0 || w_in <= 0 || c_out <= 0 || kh <= 0 || kw <= 0)
            throw std::invalid_argument("conv2d: nonpositive extent");
        if (stride <= 0) throw std::invalid_argument("conv2d: stride must be positive");
        if (pad < 0) throw std::invalid_argument("conv2d: negative pad");
        if (kh > h_in + 2 * pad || kw > w_in + 2 * pad)
            throw std::invalid_argument("conv2d: kernel " + std::to_string(kh) + "x" +
                                        std::to_string(kw) + " exceeds padded input " +
                                        std::to_string(h_in + 2 * pad) + "x" +
                                        std::to_string(w_in + 2 * pad));
    }
};

namespace detail {

// Valid output-x range for a given kernel column: 0 <= ox*stride + kx - pad < w_in.
inline void ox_range(int kx, int pad, int stride, int w_in, int w_out, int& lo, int& hi) {
    lo = std::max(0, (pad - kx + stride - 1) / stride);
    hi = std::min(w_out - 1, (w_in - 1 - kx + pad) / stride);
}

template <typename T>
void conv2d_forward_oc(const T* in, const T* k, const T* bias, T* out, const Conv2dShape& s,
                       int oc) {
    const int ho = s.h_out(), wo = s.w_out();
    T* out_c = out + static_cast<size_t>(oc) * ho * wo;
    std::fill(out_c, out_c + static_cast<size_t>(ho) * wo, bias ? bias[oc] : T(0));
    for (int ic = 0; ic < s.c_in; ++ic) {
        const T* in_c = in + static_cast<size_t>(ic) * s.h_in * s.w_in;
        const T* k_c = k + (static_cast<size_t>(oc) * s.c_in + ic) * s.kh * s.kw;
        for (int ky = 0; ky < s.kh; ++ky) {
            for (int kx = 0; kx < s.kw; ++kx) {
                const T w = k_c[ky * s.kw + kx];
                int xlo, xhi;
                ox_range(kx, s.pad, s.stride, s.w_in, wo, xlo, xhi);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.h_in) continue;
                    const T* in_row = in_c + static_cast<size_t>(iy) * s.w_in;
                    T* out_row = out_c + static_cast<size_t>(oy) * wo;
                    for (int ox = xlo; ox <= xhi; ++ox)
                        out_row[ox] += w * in_row[ox * s.stride + kx - s.pad];
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_input_ic(const T* k, const T* dout, T* din, const Conv2dShape& s, int ic) {
    const int ho = s.h_out(), wo = s.w_out();
    T* din_c = din + static_cast<size_t>(ic) * s.h_in * s.w_in;
    for (int oc = 0; oc < s.c_out; ++oc) {
        const T* dout_c = dout + static_cast<size_t>(oc) * ho * wo;
        const T* k_c = k + (static_cast<size_t>(oc) * s.c_in + ic) * s.kh * s.kw;
        for (int ky = 0; ky < s.kh; ++ky) {
            for (int kx = 0; kx < s.kw; ++kx) {
                const T w = k_c[ky * s.kw + kx];
                int xlo, xhi;
                ox_range(kx, s.pad, s.stride, s.w_in, wo, xlo, xhi);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.h_in) continue;
                    T* din_row = din_c + static_cast<size_t>(iy) * s.w_in;
                    const T* dout_row = dout_c + static_cast<size_t>(oy) * wo;
                    for (int ox = xlo; ox <= xhi; ++ox)
                        din_row[ox * s.stride + kx - s.pad] += w * dout_row[ox];
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_kernel_oc(const T* in, const T* dout, T* dk, T* db, const Conv2dShape& s,
                               int oc) {
    const int ho = s.h_out(), wo = s.w_out();
    const T* dout_c = dout + static_cast<size_t>(oc) * ho * wo;
    if (db) {
        T acc = 0;
        for (size_t i = 0; i < static_cast<size_t>(ho) * wo; ++i) acc += dout_c[i];
        db[oc] += acc;
    }
    for (int ic = 0; ic < s.c_in; ++ic) {
        const T* in_c = in + static_cast<size_t>(ic) * s.h_in * s.w_in;
        T* dk_c = dk + (static_cast<size_t>(oc) * s.c_in + ic) * s.kh * s.kw;
        for (int ky = 0; ky < s.kh; ++ky) {
            for (int kx = 0; kx < s.kw; ++kx) {
                T acc = 0;
                int xlo, xhi;
                ox_range(kx, s.pad, s.stride, s.w_in, wo, xlo, xhi);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.h_in) continue;
                    const T* in_row = in_c + static_cast<size_t>(iy) * s.w_in;
                    const T* dout_row = dout_c + static_cast<size_t>(oy) * wo;
                    for (int ox = xlo; ox <= xhi; ++ox)
                        acc += in_row[ox * s.stride + kx - s.pad] * dout_row[ox];
                }
                dk_c[ky * s.kw + kx] += acc;
            }
        }
    }
}

}  // namespace detail

// --- serial reference ---

template <typename T>
void conv2d_forward_serial(const T* in, const T* k, const T* bias, T* out, const Conv2dShape& s) {
    for (int oc = 0; oc < s.c_out; ++oc) detail::conv2d_forward_oc(in, k, bias, out, s, oc);
}

template <typename T>
void conv2d_backward_input_serial(const T* k, const T* dout, T* din, const Conv2dShape& s) {
    for (int ic = 0; ic < s.c_in; ++ic) detail::conv2d_backward_input_ic(k, dout, din, s, ic);
}

template <typename T>
void conv2d_backward_kernel_serial(const T* in, const T* dout, T* dk, T* db,
                                   const Conv2dShape& s) {
    for (int oc = 0; oc < s.c_out; ++oc) detail::conv2d_backward_kernel_oc(in, dout, dk, db, s, oc);
}

// --- OpenMP variants: one thread per output channel / input channel slice ---

template <typename T>
void conv2d_forward_parallel(const T* in, const T* k, const T* bias, T* out,
                             const Conv2dShape& s) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.c_out; ++oc) detail::conv2d_forward_oc(in, k, bias, out, s, oc);
}

template <typename T>
void conv2d_backward_input_parallel(const T* k, const T* dout, T* din, const Conv2dShape& s) {
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < s.c_in; ++ic) detail::conv2d_backward_input_ic(k, dout, din, s, ic);
}

template <typename T>
void conv2d_backward_kernel_parallel(const T* in, const T* dout, T* dk, T* db,
                                     const Conv2dShape& s) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.c_out; ++oc) detail::conv2d_backward_kernel_oc(in, dout, dk, db, s, oc);
}

// --- runtime dispatch ---

inline bool& parallel_flag() {
    static bool enabled = true;
    return enabled;
}
inline void set_parallel(bool on) { parallel_flag() = on; }
inline bool parallel_enabled() { return parallel_flag(); }

template <typename T>
void conv2d_forward(const T* in, const T* k, const T* bias, T* out, const Conv2dShape& s) {
    if (parallel_enabled())
        conv2d_forward_parallel(in, k, bias, out, s);
    else
        conv2d_forward_serial(in, k, bias, out, s);
}

template <typename T>
void conv2d_backward_input(const T* k, const T* dout, T* din, const Conv2dShape& s) {
    if (parallel_enabled())
        conv2d_backward_input_parallel(k, dout, din, s);
    else
        conv2d_backward_input_serial(k, dout, din, s);
}

template <typename T>
void conv2d_backward_kernel(const T* in, const T* dout, T* dk, T* db, const Conv2dShape& s) {
    if (parallel_enabled())
        conv2d_backward_kernel_parallel(in, dout, dk, db, s);
    else
        conv2d_backward_kernel_serial(in, dout, dk, db, s);
}

}  // namespace fsdd::kernels
