#pragma once

#include <array>

#include "iik/tensor.hpp"

// Dense image fields and the pixel-space losses shared by training,
// polishing and evaluation.  Albedo is (3,H,W), shading (1,H,W), the
// illuminant color a single RGB triple; an image factors as
// image[ch] = albedo[ch] * shading * color[ch].

namespace iik::field {

using Color = std::array<double, 3>;

Tensor compose(const Tensor& albedo, const Tensor& shading, const Color& color);

// image - compose(albedo, shading, color)
Tensor residual(const Tensor& image, const Tensor& albedo, const Tensor& shading,
                const Color& color);

// Huber distance, mean over elements: t^2 / (2 beta) inside the quadratic
// zone |t| <= beta, |t| - beta/2 outside.
double compare_mixed(const Tensor& a, const Tensor& b, double beta = 1.0);
double huber(double t, double beta = 1.0);

// Sum of squared differences (no normalization).
double sqerr_sum(const Color& a, const Color& b);

// Sum over elements of max(0, x-1)^2 + max(0, -x)^2.
double range_penalty(const Tensor& x);

double mean(const Tensor& t);
double min_value(const Tensor& t);
double max_value(const Tensor& t);

Tensor resize(const Tensor& chw, int out_h, int out_w);
Tensor blur(const Tensor& plane, double sigma);  // single channel

// Per-channel mean of a (3,H,W) tensor.
Color channel_means(const Tensor& rgb);

}  // namespace iik::field
