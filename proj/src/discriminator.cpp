#include "iik/discriminator.hpp"

#include <algorithm>

namespace iik::disc {

void DiscriminatorConfig::validate() const {
    if (layers.empty()) throw ConfigError("discriminator needs at least one layer");
    if (in_channels < 1) throw ConfigError("discriminator in_channels must be positive");
    for (const auto& L : layers) {
        if (L.kernel < 1 || L.stride < 1 || L.pad < 0)
            throw ConfigError("discriminator layer spec is malformed");
        if (L.width < 1) throw ConfigError("discriminator layer width must be positive");
    }
    if (layers.back().width != 1) throw ConfigError("discriminator must end in a single channel");
}

int DiscriminatorConfig::score_size(int input_size) const {
    int s = input_size;
    for (const auto& L : layers) {
        s = (s + 2 * L.pad - L.kernel) / L.stride + 1;
        if (s < 1) throw ConfigError("discriminator input is too small for the stack");
    }
    return s;
}

DiscriminatorConfig DiscriminatorConfig::preset(int receptive_field) {
    DiscriminatorConfig cfg;
    switch (receptive_field) {
        case 10:
            cfg.layers = {{4, 2, 1, 64}, {4, 2, 1, 1}};
            break;
        case 22:
            cfg.layers = {{4, 2, 1, 64}, {4, 2, 1, 128}, {4, 1, 1, 1}};
            break;
        case 29:
            cfg.layers = {{5, 2, 2, 64}, {5, 2, 2, 128}, {5, 1, 2, 1}};
            break;
        case 48:
            cfg.layers = {{6, 2, 2, 64}, {4, 2, 1, 128}, {4, 2, 1, 256}, {4, 1, 1, 1}};
            break;
        case 128:
            cfg.layers = {{4, 2, 0, 64}, {5, 2, 0, 128}, {4, 2, 2, 256}, {14, 1, 0, 1}};
            break;
        default:
            throw ConfigError("no discriminator preset for receptive field " +
                              std::to_string(receptive_field));
    }
    return cfg;
}

namespace {

const char* hinge_name(HingeVariant v) {
    switch (v) {
        case HingeVariant::kUnified: return "unified";
        case HingeVariant::kLiteralMain: return "literal_main";
        case HingeVariant::kLiteralE: return "literal_e";
    }
    return "unified";
}

HingeVariant hinge_from_name(const std::string& s) {
    if (s == "unified") return HingeVariant::kUnified;
    if (s == "literal_main") return HingeVariant::kLiteralMain;
    if (s == "literal_e") return HingeVariant::kLiteralE;
    throw ConfigError("unknown hinge variant: " + s);
}

}  // namespace

nlohmann::json DiscriminatorConfig::to_json() const {
    nlohmann::json ls = nlohmann::json::array();
    for (const auto& L : layers)
        ls.push_back({{"kernel", L.kernel}, {"stride", L.stride}, {"pad", L.pad}, {"width", L.width}});
    return {{"layers", ls}, {"in_channels", in_channels}, {"hinge", hinge_name(hinge)}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
    DiscriminatorConfig cfg;
    cfg.layers.clear();
    for (const auto& L : j.at("layers"))
        cfg.layers.push_back({L.at("kernel").get<int>(), L.at("stride").get<int>(),
                              L.at("pad").get<int>(), L.at("width").get<int>()});
    cfg.in_channels = j.at("in_channels").get<int>();
    if (j.contains("hinge")) cfg.hinge = hinge_from_name(j.at("hinge").get<std::string>());
    cfg.validate();
    return cfg;
}

int receptive_field(const std::vector<ConvSpec>& layers) {
    int rf = 1, jump = 1;
    for (const auto& L : layers) {
        rf += (L.kernel - 1) * jump;
        jump *= L.stride;
    }
    return rf;
}

int stride_product(const std::vector<ConvSpec>& layers) {
    int jump = 1;
    for (const auto& L : layers) jump *= L.stride;
    return jump;
}

std::vector<std::string> block_names(const DiscriminatorConfig& cfg) {
    std::vector<std::string> names;
    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        const std::string base = "conv" + std::to_string(i);
        names.push_back(base + ".weight");
        names.push_back(base + ".bias");
        names.push_back(base + ".sn_u");
    }
    return names;
}

std::vector<std::vector<int>> block_shapes(const DiscriminatorConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<int>> shapes;
    int c = cfg.in_channels;
    for (const auto& L : cfg.layers) {
        shapes.push_back({L.width, c, L.kernel, L.kernel});
        shapes.push_back({L.width});
        shapes.push_back({L.width});
        c = L.width;
    }
    return shapes;
}

int probe_footprint(const DiscriminatorConfig& cfg, uint64_t seed, int input_size) {
    const auto params = init_params<double>(cfg, seed);
    Rng rng(seed, streams::sub(streams::kEval, 1));
    Tensor pair({1, cfg.in_channels, input_size, input_size});
    for (double& v : pair.data) v = rng.uniform(0.0, 1.0);

    ad::Tape<double> tape;
    const int input = tape.leaf(pair);
    const int f = score_map(tape, params, input);
    const auto& fshape = tape.value(f).shape;
    const int k = fshape[2];

    Tensor pickcell(fshape, 0.0);
    const int cy = k / 2, cx = fshape[3] / 2;
    pickcell.data[static_cast<size_t>(cy) * fshape[3] + cx] = 1.0;
    tape.backward(tape.dot_mean(f, pickcell));

    const Tensor& g = tape.grad(input);
    int y0 = input_size, y1 = -1, x0 = input_size, x1 = -1;
    for (int c = 0; c < cfg.in_channels; ++c)
        for (int y = 0; y < input_size; ++y)
            for (int x = 0; x < input_size; ++x)
                if (g.data[(static_cast<size_t>(c) * input_size + y) * input_size + x] != 0.0) {
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y);
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x);
                }
    if (y1 < 0) return 0;
    return std::max(y1 - y0 + 1, x1 - x0 + 1);
}

}  // namespace iik::disc
