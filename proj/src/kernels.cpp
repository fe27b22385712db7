#include "iik/kernels.hpp"

namespace iik::kernels {

namespace {

inline int reflect_index(int i, int n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
    return std::clamp(i, 0, n - 1);
}

// One separable pass along x; transpose-free by letting the caller flip
// h/w and strides.
void blur_axis(int h, int w, const double* in, double* out, const std::vector<double>& taps,
               bool along_x) {
    const int r = static_cast<int>(taps.size()) / 2;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            if (along_x) {
                for (int t = -r; t <= r; ++t)
                    acc += taps[t + r] * in[static_cast<size_t>(y) * w + reflect_index(x + t, w)];
            } else {
                for (int t = -r; t <= r; ++t)
                    acc += taps[t + r] * in[static_cast<size_t>(reflect_index(y + t, h)) * w + x];
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    }
}

}  // namespace

std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian blur needs sigma > 0");
    const int r = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> taps(2 * r + 1);
    double sum = 0.0;
    for (int t = -r; t <= r; ++t) {
        taps[t + r] = std::exp(-0.5 * (t / sigma) * (t / sigma));
        sum += taps[t + r];
    }
    for (double& v : taps) v /= sum;
    return taps;
}

void gaussian_blur(int h, int w, const double* in, double* out, double sigma) {
    const std::vector<double> taps = gaussian_taps(sigma);
    std::vector<double> tmp(static_cast<size_t>(h) * w);
    blur_axis(h, w, in, tmp.data(), taps, true);
    blur_axis(h, w, tmp.data(), out, taps, false);
}

void resize_bilinear(int c, int in_h, int in_w, const double* in, int out_h, int out_w,
                     double* out) {
    if (in_h < 1 || in_w < 1 || out_h < 1 || out_w < 1) throw ConfigError("resize needs positive sizes");
    const double sy = static_cast<double>(in_h) / out_h;
    const double sx = static_cast<double>(in_w) / out_w;
    std::vector<int> x0(out_w), x1(out_w);
    std::vector<double> fx(out_w);
    for (int x = 0; x < out_w; ++x) {
        const double src = std::clamp((x + 0.5) * sx - 0.5, 0.0, in_w - 1.0);
        x0[x] = static_cast<int>(src);
        x1[x] = std::min(x0[x] + 1, in_w - 1);
        fx[x] = src - x0[x];
    }
    const size_t in_plane = static_cast<size_t>(in_h) * in_w;
    const size_t out_plane = static_cast<size_t>(out_h) * out_w;
#pragma omp parallel for schedule(static) collapse(2)
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < out_h; ++y) {
            const double src = std::clamp((y + 0.5) * sy - 0.5, 0.0, in_h - 1.0);
            const int y0 = static_cast<int>(src);
            const int y1 = std::min(y0 + 1, in_h - 1);
            const double fy = src - y0;
            const double* r0 = in + ch * in_plane + static_cast<size_t>(y0) * in_w;
            const double* r1 = in + ch * in_plane + static_cast<size_t>(y1) * in_w;
            double* dst = out + ch * out_plane + static_cast<size_t>(y) * out_w;
            for (int x = 0; x < out_w; ++x) {
                const double top = r0[x0[x]] + fx[x] * (r0[x1[x]] - r0[x0[x]]);
                const double bot = r1[x0[x]] + fx[x] * (r1[x1[x]] - r1[x0[x]]);
                dst[x] = top + fy * (bot - top);
            }
        }
    }
}

namespace ref {

void gaussian_blur(int h, int w, const double* in, double* out, double sigma) {
    const std::vector<double> taps = gaussian_taps(sigma);
    const int r = static_cast<int>(taps.size()) / 2;
    std::vector<double> tmp(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -r; t <= r; ++t) acc += taps[t + r] * in[static_cast<size_t>(y) * w + reflect_index(x + t, w)];
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -r; t <= r; ++t) acc += taps[t + r] * tmp[static_cast<size_t>(reflect_index(y + t, h)) * w + x];
            out[static_cast<size_t>(y) * w + x] = acc;
        }
}

void resize_bilinear(int c, int in_h, int in_w, const double* in, int out_h, int out_w,
                     double* out) {
    const double sy = static_cast<double>(in_h) / out_h;
    const double sx = static_cast<double>(in_w) / out_w;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                const double srcy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in_h - 1.0);
                const double srcx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in_w - 1.0);
                const int y0 = static_cast<int>(srcy), x0 = static_cast<int>(srcx);
                const int y1 = std::min(y0 + 1, in_h - 1), x1 = std::min(x0 + 1, in_w - 1);
                const double fy = srcy - y0, fx = srcx - x0;
                auto at = [&](int yy, int xx) {
                    return in[ch * static_cast<size_t>(in_h) * in_w + static_cast<size_t>(yy) * in_w + xx];
                };
                const double top = at(y0, x0) + fx * (at(y0, x1) - at(y0, x0));
                const double bot = at(y1, x0) + fx * (at(y1, x1) - at(y1, x0));
                out[ch * static_cast<size_t>(out_h) * out_w + static_cast<size_t>(y) * out_w + x] =
                    top + fy * (bot - top);
            }
}

}  // namespace ref

}  // namespace iik::kernels
