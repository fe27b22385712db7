#include "iik/polish.hpp"

#include <algorithm>
#include <cmath>

namespace iik::polish {

void PolishConfig::validate() const {
    if (iterations < 0) throw ConfigError("polish iterations must be >= 0");
    if (!(shading_floor > 0.0) || !(color_floor > 0.0))
        throw ConfigError("polish floors must be positive");
}

nlohmann::json PolishConfig::to_json() const {
    return {{"iterations", iterations},
            {"shading_floor", shading_floor},
            {"color_floor", color_floor}};
}

PolishConfig PolishConfig::from_json(const nlohmann::json& j) {
    PolishConfig c;
    c.iterations = j.value("iterations", c.iterations);
    c.shading_floor = j.value("shading_floor", c.shading_floor);
    c.color_floor = j.value("color_floor", c.color_floor);
    c.validate();
    return c;
}

void polish_step(const Tensor& image, Decomposition& d, const PolishConfig& cfg) {
    if (!image.same_shape(d.albedo)) throw ConfigError("polish: image shape mismatch");
    const size_t plane = static_cast<size_t>(image.shape[1]) * image.shape[2];
    const double* img = image.ptr();
    double* a = d.albedo.ptr();
    double* s = d.shading.ptr();
    const double* c = d.color.ptr();

#pragma omp parallel for schedule(static)
    for (long pp = 0; pp < static_cast<long>(plane); ++pp) {
        const size_t p = static_cast<size_t>(pp);
        double eff[3], r[3];
        double rp = 0.0, pp2 = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            const size_t i = ch * plane + p;
            eff[ch] = a[i] * c[i];
            r[ch] = img[i] - eff[ch] * s[p];
            rp += r[ch] * eff[ch];
            pp2 += eff[ch] * eff[ch];
        }
        const double ds = rp / std::max(pp2 + s[p] * s[p], 1e-30);
        const double sv = s[p];
        for (int ch = 0; ch < 3; ++ch) {
            const size_t i = ch * plane + p;
            const double dp = sv >= cfg.shading_floor ? (r[ch] - eff[ch] * ds) / sv : 0.0;
            a[i] = (eff[ch] + dp) / std::max(c[i], cfg.color_floor);
        }
        s[p] = sv + ds;
    }
}

void polish(const Tensor& image, Decomposition& d, const PolishConfig& cfg) {
    cfg.validate();
    for (int it = 0; it < cfg.iterations; ++it) polish_step(image, d, cfg);
    d.residual = residual(image, d);
}

}  // namespace iik::polish
