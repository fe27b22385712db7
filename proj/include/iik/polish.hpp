#pragma once

#include "iik/decomposition.hpp"
#include "json.hpp"

// Closed-form pointwise residual reduction.  With effective albedo
// p = albedo * color and residual r = image - p * s, the update
//
//   ds = r.p / (p.p + s^2),   dp = (r - p * ds) / s
//
// is the minimum-norm (ds, dp) driving the linearized residual to zero:
// it satisfies p*ds + s*dp = r exactly and minimizes ds^2 + |dp|^2.
// The color field is frozen; albedo is recovered as p / max(color, floor).

namespace iik::polish {

struct PolishConfig {
    int iterations = 2;
    double shading_floor = 1e-4;  // below this, skip the albedo update
    double color_floor = 1e-4;    // divisor floor recovering albedo from p

    void validate() const;
    nlohmann::json to_json() const;
    static PolishConfig from_json(const nlohmann::json& j);
};

// One linearized update at every pixel; color and residual untouched.
void polish_step(const Tensor& image, Decomposition& d, const PolishConfig& cfg);

// cfg.iterations steps, then refresh d.residual.
void polish(const Tensor& image, Decomposition& d, const PolishConfig& cfg);

}  // namespace iik::polish
