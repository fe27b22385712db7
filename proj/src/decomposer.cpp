#include "iik/decomposer.hpp"

#include <algorithm>
#include <cmath>

namespace iik::dec {

void DecomposerConfig::validate() const {
    if (tile < 32 || tile % 32 != 0)
        throw ConfigError("decomposer tile must be a positive multiple of 32");
    if (base_width < 1 || max_width < base_width)
        throw ConfigError("need 1 <= base_width <= max_width");
    if (code_cutoff <= 0.0) throw ConfigError("code_cutoff must be positive");
}

std::vector<int> DecomposerConfig::widths() const {
    std::vector<int> w(kDepth + 1);
    for (int i = 0; i <= kDepth; ++i)
        w[i] = std::min(base_width << i, max_width);
    return w;
}

nlohmann::json DecomposerConfig::to_json() const {
    return {{"tile", tile},
            {"base_width", base_width},
            {"max_width", max_width},
            {"location_code", location_code},
            {"code_cutoff", code_cutoff}};
}

DecomposerConfig DecomposerConfig::from_json(const nlohmann::json& j) {
    DecomposerConfig cfg;
    cfg.tile = j.value("tile", cfg.tile);
    cfg.base_width = j.value("base_width", cfg.base_width);
    cfg.max_width = j.value("max_width", cfg.max_width);
    cfg.location_code = j.value("location_code", cfg.location_code);
    cfg.code_cutoff = j.value("code_cutoff", cfg.code_cutoff);
    cfg.validate();
    return cfg;
}

std::vector<std::string> block_names() {
    std::vector<std::string> names;
    for (int i = 0; i <= kDepth; ++i) {
        names.push_back("enc" + std::to_string(i) + ".weight");
        names.push_back("enc" + std::to_string(i) + ".bias");
    }
    for (int i = 0; i <= kDepth; ++i) {
        names.push_back("dec" + std::to_string(i) + ".weight");
        names.push_back("dec" + std::to_string(i) + ".bias");
    }
    names.insert(names.end(), {"albedo.weight", "albedo.bias", "shading.weight", "shading.bias",
                               "color.weight", "color.bias"});
    return names;
}

std::vector<std::vector<int>> block_shapes(const DecomposerConfig& cfg) {
    const std::vector<int> w = cfg.widths();
    std::vector<std::vector<int>> shapes;
    shapes.push_back({w[0], cfg.in_channels(), 1, 1});
    shapes.push_back({w[0]});
    for (int i = 1; i <= kDepth; ++i) {
        shapes.push_back({w[i], w[i - 1], 4, 4});
        shapes.push_back({w[i]});
    }
    int zw = w[kDepth];
    for (int i = 0; i < kDepth; ++i) {
        const int skip_w = w[kDepth - i];
        const int out_w = w[kDepth - 1 - i];
        shapes.push_back({out_w, zw + skip_w, 5, 5});
        shapes.push_back({out_w});
        zw = out_w;
    }
    shapes.push_back({w[0], zw + w[0], 5, 5});  // fusion with the lift block
    shapes.push_back({w[0]});
    shapes.push_back({3, w[0], 1, 1});
    shapes.push_back({3});
    shapes.push_back({1, w[0], 1, 1});
    shapes.push_back({1});
    shapes.push_back({3, w[kDepth]});
    shapes.push_back({3});
    return shapes;
}

Tensor location_code_field(int height, int width, double cutoff) {
    if (height < 1 || width < 1) throw ConfigError("location code needs positive sizes");
    Tensor code({4, height, width});
    const size_t plane = static_cast<size_t>(height) * width;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const size_t p = static_cast<size_t>(y) * width + x;
            code.data[0 * plane + p] = std::max(0.0, cutoff - x);                 // left
            code.data[1 * plane + p] = std::max(0.0, cutoff - (width - 1 - x));   // right
            code.data[2 * plane + p] = std::max(0.0, cutoff - y);                 // top
            code.data[3 * plane + p] = std::max(0.0, cutoff - (height - 1 - y));  // bottom
        }
    return code;
}

}  // namespace iik::dec
