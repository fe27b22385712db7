#pragma once

#include "iik/tensor.hpp"

// Full-image decomposition.  Unlike a single tile, the averaged illuminant
// color is a per-pixel field: every tile contributes a constant, but their
// weighted blend varies with position.

namespace iik {

struct Decomposition {
    Tensor albedo;    // (3,H,W)
    Tensor shading;   // (1,H,W)
    Tensor color;     // (3,H,W)
    Tensor residual;  // (3,H,W), image - compose(); empty until attached
};

// albedo * shading * color, elementwise with the color field.
inline Tensor compose(const Decomposition& d) {
    if (d.albedo.rank() != 3 || d.albedo.shape[0] != 3) throw ConfigError("compose: albedo must be (3,H,W)");
    if (!d.albedo.same_shape(d.color)) throw ConfigError("compose: color field shape mismatch");
    if (d.shading.rank() != 3 || d.shading.shape[0] != 1 || d.shading.shape[1] != d.albedo.shape[1] ||
        d.shading.shape[2] != d.albedo.shape[2])
        throw ConfigError("compose: shading shape mismatch");
    const size_t plane = static_cast<size_t>(d.albedo.shape[1]) * d.albedo.shape[2];
    Tensor out(d.albedo.shape);
    for (int ch = 0; ch < 3; ++ch) {
        const double* a = d.albedo.ptr() + ch * plane;
        const double* c = d.color.ptr() + ch * plane;
        const double* s = d.shading.ptr();
        double* o = out.ptr() + ch * plane;
        for (size_t p = 0; p < plane; ++p) o[p] = a[p] * s[p] * c[p];
    }
    return out;
}

inline Tensor residual(const Tensor& image, const Decomposition& d) {
    Tensor out = compose(d);
    if (!image.same_shape(out)) throw ConfigError("residual: image shape mismatch");
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = image.data[i] - out.data[i];
    return out;
}

}  // namespace iik
