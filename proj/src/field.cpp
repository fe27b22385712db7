#include "iik/field.hpp"

#include <algorithm>
#include <cmath>

#include "iik/kernels.hpp"

namespace iik::field {

namespace {

void check_pair(const Tensor& albedo, const Tensor& shading) {
    if (albedo.rank() != 3 || albedo.shape[0] != 3) throw ConfigError("albedo must be (3,H,W)");
    if (shading.rank() != 3 || shading.shape[0] != 1) throw ConfigError("shading must be (1,H,W)");
    if (albedo.shape[1] != shading.shape[1] || albedo.shape[2] != shading.shape[2])
        throw ConfigError("albedo/shading spatial sizes differ");
}

}  // namespace

Tensor compose(const Tensor& albedo, const Tensor& shading, const Color& color) {
    check_pair(albedo, shading);
    const size_t plane = static_cast<size_t>(albedo.shape[1]) * albedo.shape[2];
    Tensor out(albedo.shape);
    for (int ch = 0; ch < 3; ++ch) {
        const double* a = albedo.ptr() + ch * plane;
        const double* s = shading.ptr();
        double* o = out.ptr() + ch * plane;
        const double c = color[ch];
        for (size_t p = 0; p < plane; ++p) o[p] = a[p] * s[p] * c;
    }
    return out;
}

Tensor residual(const Tensor& image, const Tensor& albedo, const Tensor& shading,
                const Color& color) {
    Tensor out = compose(albedo, shading, color);
    if (!image.same_shape(out)) throw ConfigError("residual: image shape mismatch");
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = image.data[i] - out.data[i];
    return out;
}

double huber(double t, double beta) {
    const double a = std::abs(t);
    return a <= beta ? t * t / (2.0 * beta) : a - beta / 2.0;
}

double compare_mixed(const Tensor& a, const Tensor& b, double beta) {
    if (!a.same_shape(b)) throw ConfigError("compare_mixed: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += huber(a.data[i] - b.data[i], beta);
    return acc / static_cast<double>(a.size());
}

double sqerr_sum(const Color& a, const Color& b) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

double range_penalty(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data) {
        const double over = std::max(0.0, v - 1.0);
        const double under = std::max(0.0, -v);
        acc += over * over + under * under;
    }
    return acc;
}

double mean(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.data) acc += v;
    return acc / static_cast<double>(t.size());
}

double min_value(const Tensor& t) { return *std::min_element(t.data.begin(), t.data.end()); }
double max_value(const Tensor& t) { return *std::max_element(t.data.begin(), t.data.end()); }

Tensor resize(const Tensor& chw, int out_h, int out_w) {
    if (chw.rank() != 3) throw ConfigError("resize expects a CHW tensor");
    Tensor out({chw.shape[0], out_h, out_w});
    kernels::resize_bilinear(chw.shape[0], chw.shape[1], chw.shape[2], chw.ptr(), out_h, out_w,
                             out.ptr());
    return out;
}

Tensor blur(const Tensor& plane, double sigma) {
    if (plane.rank() != 3 || plane.shape[0] != 1) throw ConfigError("blur expects a (1,H,W) tensor");
    Tensor out(plane.shape);
    kernels::gaussian_blur(plane.shape[1], plane.shape[2], plane.ptr(), out.ptr(), sigma);
    return out;
}

Color channel_means(const Tensor& rgb) {
    if (rgb.rank() != 3 || rgb.shape[0] != 3) throw ConfigError("channel_means expects (3,H,W)");
    const size_t plane = static_cast<size_t>(rgb.shape[1]) * rgb.shape[2];
    Color out{};
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        const double* p = rgb.ptr() + ch * plane;
        for (size_t i = 0; i < plane; ++i) acc += p[i];
        out[ch] = acc / static_cast<double>(plane);
    }
    return out;
}

}  // namespace iik::field
