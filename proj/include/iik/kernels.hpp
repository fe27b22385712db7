#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "iik/common.hpp"

// Hot loops shared by the autodiff ops, the samplers and the averaging
// pipeline.  Every kernel here accumulates each output element in a fixed
// (k-ascending) order, so results are bit-reproducible regardless of the
// number of OpenMP threads.  iik::kernels::ref holds the naive serial
// implementations the tests and the benchmark compare against.

namespace iik::kernels {

// ---------------------------------------------------------------- gemm --

// C[M x N] (+)= A[M x K] * B[K x N], row-major.
template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    constexpr int kMr = 4;        // C rows per micro tile
    constexpr int kNb = 512;      // column panel
    constexpr int kKb = 256;      // depth panel
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < M; i0 += kMr) {
        const int mr = std::min(kMr, M - i0);
        if (!accumulate) {
            for (int r = 0; r < mr; ++r) std::memset(C + static_cast<size_t>(i0 + r) * N, 0, sizeof(T) * N);
        }
        for (int k0 = 0; k0 < K; k0 += kKb) {
            const int k1 = std::min(k0 + kKb, K);
            for (int j0 = 0; j0 < N; j0 += kNb) {
                const int j1 = std::min(j0 + kNb, N);
                for (int r = 0; r < mr; ++r) {
                    const T* a_row = A + static_cast<size_t>(i0 + r) * K;
                    T* c_row = C + static_cast<size_t>(i0 + r) * N;
                    for (int k = k0; k < k1; ++k) {
                        const T a = a_row[k];
                        const T* b_row = B + static_cast<size_t>(k) * N;
#pragma omp simd
                        for (int j = j0; j < j1; ++j) c_row[j] += a * b_row[j];
                    }
                }
            }
        }
    }
}

// C[M x N] (+)= A[M x K] * B[N x K]^T  (dot-product form).
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        const T* a_row = A + static_cast<size_t>(i) * K;
        T* c_row = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const T* b_row = B + static_cast<size_t>(j) * K;
            T acc = 0;
#pragma omp simd reduction(+ : acc)
            for (int k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
            c_row[j] = accumulate ? c_row[j] + acc : acc;
        }
    }
}

// C[M x N] (+)= A[K x M]^T * B[K x N]  (axpy form).
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    constexpr int kMr = 4;
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < M; i0 += kMr) {
        const int mr = std::min(kMr, M - i0);
        if (!accumulate) {
            for (int r = 0; r < mr; ++r) std::memset(C + static_cast<size_t>(i0 + r) * N, 0, sizeof(T) * N);
        }
        for (int k = 0; k < K; ++k) {
            const T* b_row = B + static_cast<size_t>(k) * N;
            for (int r = 0; r < mr; ++r) {
                const T a = A[static_cast<size_t>(k) * M + i0 + r];
                T* c_row = C + static_cast<size_t>(i0 + r) * N;
#pragma omp simd
                for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
            }
        }
    }
}

// ---------------------------------------------------------------- conv --

struct ConvShape {
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0, kernel = 1, stride = 1, pad = 0;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
    int patch_len() const { return in_c * kernel * kernel; }
    bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
    void validate() const {
        if (out_h() < 1 || out_w() < 1) throw ConfigError("conv output collapses to zero size");
    }
};

// col is (patch_len x out_h*out_w); out-of-support taps are zero.
template <typename T>
void im2col(const ConvShape& s, const T* in, T* col) {
    const int oh = s.out_h(), ow = s.out_w();
    const size_t plane = static_cast<size_t>(s.in_h) * s.in_w;
#pragma omp parallel for schedule(static)
    for (int row = 0; row < s.patch_len(); ++row) {
        const int kx = row % s.kernel;
        const int ky = (row / s.kernel) % s.kernel;
        const int ci = row / (s.kernel * s.kernel);
        const T* src = in + ci * plane;
        T* dst = col + static_cast<size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride + ky - s.pad;
            T* drow = dst + static_cast<size_t>(oy) * ow;
            if (iy < 0 || iy >= s.in_h) {
                std::memset(drow, 0, sizeof(T) * ow);
                continue;
            }
            const T* srow = src + static_cast<size_t>(iy) * s.in_w;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride + kx - s.pad;
                drow[ox] = (ix >= 0 && ix < s.in_w) ? srow[ix] : T(0);
            }
        }
    }
}

// Adjoint of im2col; accumulates into `in`.
template <typename T>
void col2im_add(const ConvShape& s, const T* col, T* in) {
    const int oh = s.out_h(), ow = s.out_w();
    const size_t plane = static_cast<size_t>(s.in_h) * s.in_w;
    for (int row = 0; row < s.patch_len(); ++row) {
        const int kx = row % s.kernel;
        const int ky = (row / s.kernel) % s.kernel;
        const int ci = row / (s.kernel * s.kernel);
        T* dst = in + ci * plane;
        const T* src = col + static_cast<size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride + ky - s.pad;
            if (iy < 0 || iy >= s.in_h) continue;
            T* drow = dst + static_cast<size_t>(iy) * s.in_w;
            const T* srow = src + static_cast<size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride + kx - s.pad;
                if (ix >= 0 && ix < s.in_w) drow[ix] += srow[ox];
            }
        }
    }
}

// Scratch reused across conv calls on the same thread.
template <typename T>
std::vector<T>& conv_scratch() {
    thread_local std::vector<T> buf;
    return buf;
}

// in (N,Ci,H,W), w (Co,Ci,k,k), bias (Co) or null, out (N,Co,Ho,Wo).
template <typename T>
void conv2d_forward(const ConvShape& s, int n, const T* in, const T* w, const T* bias, T* out) {
    s.validate();
    const int oh = s.out_h(), ow = s.out_w();
    const size_t px = static_cast<size_t>(oh) * ow;
    const size_t in_sz = static_cast<size_t>(s.in_c) * s.in_h * s.in_w;
    const size_t out_sz = static_cast<size_t>(s.out_c) * px;
    for (int i = 0; i < n; ++i) {
        const T* x = in + i * in_sz;
        T* y = out + i * out_sz;
        if (s.is_pointwise()) {
            gemm<T>(s.out_c, static_cast<int>(px), s.in_c, w, x, y, false);
        } else {
            auto& col = conv_scratch<T>();
            col.resize(static_cast<size_t>(s.patch_len()) * px);
            im2col(s, x, col.data());
            gemm<T>(s.out_c, static_cast<int>(px), s.patch_len(), w, col.data(), y, false);
        }
        if (bias) {
            for (int co = 0; co < s.out_c; ++co) {
                const T b = bias[co];
                T* row = y + co * px;
#pragma omp simd
                for (size_t p = 0; p < px; ++p) row[p] += b;
            }
        }
    }
}

// grad_in (N,Ci,H,W); accumulated when `accumulate`, else overwritten.
template <typename T>
void conv2d_backward_input(const ConvShape& s, int n, const T* w, const T* grad_out, T* grad_in,
                           bool accumulate) {
    const int oh = s.out_h(), ow = s.out_w();
    const size_t px = static_cast<size_t>(oh) * ow;
    const size_t in_sz = static_cast<size_t>(s.in_c) * s.in_h * s.in_w;
    const size_t out_sz = static_cast<size_t>(s.out_c) * px;
    for (int i = 0; i < n; ++i) {
        const T* gy = grad_out + i * out_sz;
        T* gx = grad_in + i * in_sz;
        if (s.is_pointwise()) {
            gemm_tn<T>(s.in_c, static_cast<int>(px), s.out_c, w, gy, gx, accumulate);
        } else {
            auto& col = conv_scratch<T>();
            col.resize(static_cast<size_t>(s.patch_len()) * px);
            gemm_tn<T>(s.patch_len(), static_cast<int>(px), s.out_c, w, gy, col.data(), false);
            if (!accumulate) std::memset(gx, 0, sizeof(T) * in_sz);
            col2im_add(s, col.data(), gx);
        }
    }
}

// grad_w (Co,Ci,k,k) and grad_bias (Co) accumulated (callers zero them).
template <typename T>
void conv2d_backward_params(const ConvShape& s, int n, const T* in, const T* grad_out, T* grad_w,
                            T* grad_bias) {
    const int oh = s.out_h(), ow = s.out_w();
    const size_t px = static_cast<size_t>(oh) * ow;
    const size_t in_sz = static_cast<size_t>(s.in_c) * s.in_h * s.in_w;
    const size_t out_sz = static_cast<size_t>(s.out_c) * px;
    for (int i = 0; i < n; ++i) {
        const T* x = in + i * in_sz;
        const T* gy = grad_out + i * out_sz;
        if (s.is_pointwise()) {
            gemm_nt<T>(s.out_c, s.in_c, static_cast<int>(px), gy, x, grad_w, true);
        } else {
            auto& col = conv_scratch<T>();
            col.resize(static_cast<size_t>(s.patch_len()) * px);
            im2col(s, x, col.data());
            gemm_nt<T>(s.out_c, s.patch_len(), static_cast<int>(px), gy, col.data(), grad_w, true);
        }
        if (grad_bias) {
            for (int co = 0; co < s.out_c; ++co) {
                const T* row = gy + co * px;
                T acc = 0;
#pragma omp simd reduction(+ : acc)
                for (size_t p = 0; p < px; ++p) acc += row[p];
                grad_bias[co] += acc;
            }
        }
    }
}

// ------------------------------------------------------ gaussian blur --

// Truncated (4 sigma) normalized kernel, symmetric-reflect padding
// (edge repeated: -1 -> 0, n -> n-1).
std::vector<double> gaussian_taps(double sigma);
void gaussian_blur(int h, int w, const double* in, double* out, double sigma);

// ------------------------------------------------------------- resize --

// Bilinear with half-pixel centers and border clamp; CHW layout.
void resize_bilinear(int c, int in_h, int in_w, const double* in, int out_h, int out_w,
                     double* out);

// ---------------------------------------------------------- reference --

namespace ref {

template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    for (int i = 0; i < M; ++i) {
        T* c_row = C + static_cast<size_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c_row[j] = 0;
        for (int k = 0; k < K; ++k) {
            const T a = A[static_cast<size_t>(i) * K + k];
            const T* b_row = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// Direct convolution, no im2col; the oracle for the fast path.
template <typename T>
void conv2d_forward(const ConvShape& s, int n, const T* in, const T* w, const T* bias, T* out) {
    const int oh = s.out_h(), ow = s.out_w();
    const size_t in_plane = static_cast<size_t>(s.in_h) * s.in_w;
    const size_t in_sz = static_cast<size_t>(s.in_c) * in_plane;
    const size_t out_sz = static_cast<size_t>(s.out_c) * oh * ow;
    for (int i = 0; i < n; ++i) {
        for (int co = 0; co < s.out_c; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = bias ? bias[co] : T(0);
                    for (int ci = 0; ci < s.in_c; ++ci) {
                        for (int ky = 0; ky < s.kernel; ++ky) {
                            const int iy = oy * s.stride + ky - s.pad;
                            if (iy < 0 || iy >= s.in_h) continue;
                            for (int kx = 0; kx < s.kernel; ++kx) {
                                const int ix = ox * s.stride + kx - s.pad;
                                if (ix < 0 || ix >= s.in_w) continue;
                                acc += w[((static_cast<size_t>(co) * s.in_c + ci) * s.kernel + ky) * s.kernel + kx] *
                                       in[i * in_sz + ci * in_plane + static_cast<size_t>(iy) * s.in_w + ix];
                            }
                        }
                    }
                    out[i * out_sz + (static_cast<size_t>(co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
}

void gaussian_blur(int h, int w, const double* in, double* out, double sigma);
void resize_bilinear(int c, int in_h, int in_w, const double* in, int out_h, int out_w,
                     double* out);

}  // namespace ref

}  // namespace iik::kernels
