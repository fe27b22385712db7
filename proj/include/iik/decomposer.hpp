#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "iik/autodiff.hpp"
#include "iik/checkpoint.hpp"
#include "iik/rng.hpp"
#include "iik/tensor.hpp"

// The tile decomposer: a U-net over 128x128 tiles (RGB plus optional
// location-code channels) predicting an albedo field, a shading field and
// a positive illuminant color.
//
// Layout: a 1x1 lift, five stride-2 4x4 encoder convs (widths doubling
// from base_width, capped at max_width), then five decoder stages, each
// "concat matching encoder block -> 5x5 conv -> leaky relu -> bilinear x2
// upsample" (the bottleneck concatenates with itself), and a final fusion
// conv with the lift output at full resolution.  Albedo/shading come from
// 1x1 heads squashed with (tanh+1)/2; color is exp(affine(global average
// of the bottleneck)), hence always positive.  With all-zero parameters
// the outputs are exactly albedo=shading=0.5 and color=(1,1,1).

namespace iik::dec {

inline constexpr int kDepth = 5;  // stride-2 encoder convs

struct DecomposerConfig {
    int tile = 128;
    int base_width = 32;
    int max_width = 256;
    bool location_code = true;
    double code_cutoff = 40.0;

    void validate() const;
    int in_channels() const { return location_code ? 7 : 3; }
    std::vector<int> widths() const;  // kDepth+1 block widths

    nlohmann::json to_json() const;
    static DecomposerConfig from_json(const nlohmann::json& j);
};

// Block order: enc0..enc5 (weight, bias), dec0..dec5 (weight, bias),
// albedo/shading head (weight, bias), color head (weight, bias).
std::vector<std::string> block_names();
std::vector<std::vector<int>> block_shapes(const DecomposerConfig& cfg);

template <typename T>
struct DecomposerParams {
    DecomposerConfig cfg;
    std::vector<TensorT<T>> blocks;

    template <typename U>
    DecomposerParams<U> cast() const {
        DecomposerParams<U> out;
        out.cfg = cfg;
        out.blocks.reserve(blocks.size());
        for (const auto& b : blocks) out.blocks.push_back(b.template cast<U>());
        return out;
    }
};

template <typename T>
DecomposerParams<T> zero_params(const DecomposerConfig& cfg) {
    cfg.validate();
    DecomposerParams<T> p;
    p.cfg = cfg;
    for (const auto& s : block_shapes(cfg)) p.blocks.emplace_back(s);
    return p;
}

// He-style normal init for conv kernels, smaller scale for the color head,
// zero biases; one sequential stream keeps it reproducible.
template <typename T>
DecomposerParams<T> init_params(const DecomposerConfig& cfg, uint64_t seed) {
    DecomposerParams<T> p = zero_params<T>(cfg);
    const std::vector<std::string> names = block_names();
    Rng rng(seed, streams::kInit);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        if (names[i].find(".bias") != std::string::npos) continue;
        auto& b = p.blocks[i];
        size_t fan_in = 1;
        for (int d = 1; d < b.rank(); ++d) fan_in *= static_cast<size_t>(b.shape[d]);
        const double scale = names[i] == "color.weight" ? 1.0 / std::sqrt(static_cast<double>(fan_in))
                                                        : std::sqrt(2.0 / static_cast<double>(fan_in));
        for (auto& v : b.data) v = static_cast<T>(scale * rng.normal());
    }
    return p;
}

// Channels: distance-to-edge ramps (left, right, top, bottom), each
// max(0, cutoff - distance) with 0-based pixel distance.
Tensor location_code_field(int height, int width, double cutoff);

// Assembles the network input for a batch of RGB tiles: the location-code
// channels are appended when the config asks for them.
template <typename T>
TensorT<T> assemble_input(const DecomposerConfig& cfg, const TensorT<T>& rgb) {
    if (rgb.rank() != 4 || rgb.shape[1] != 3) throw ConfigError("decomposer input must be (N,3,H,W)");
    if (!cfg.location_code) return rgb;
    const int n = rgb.shape[0], h = rgb.shape[2], w = rgb.shape[3];
    const TensorT<T> code = location_code_field(h, w, cfg.code_cutoff).template cast<T>();
    TensorT<T> out({n, 7, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        std::copy(rgb.ptr() + static_cast<size_t>(i) * 3 * plane,
                  rgb.ptr() + static_cast<size_t>(i + 1) * 3 * plane,
                  out.ptr() + static_cast<size_t>(i) * 7 * plane);
        std::copy(code.ptr(), code.ptr() + 4 * plane,
                  out.ptr() + (static_cast<size_t>(i) * 7 + 3) * plane);
    }
    return out;
}

struct Heads {
    int albedo = -1;   // (N,3,H,W) in [0,1]
    int shading = -1;  // (N,1,H,W) in [0,1]
    int color = -1;    // (N,3), positive
};

// Runs the network on the tape.  `input` must be (N, in_channels, tile,
// tile).  When param_ids is given it receives one tape id per block, in
// block order, pushed with needs_grad = params_need_grad.
template <typename T>
Heads forward(ad::Tape<T>& tape, const DecomposerParams<T>& params, int input,
              std::vector<int>* param_ids = nullptr, bool params_need_grad = false) {
    const DecomposerConfig& cfg = params.cfg;
    const auto& in_shape = tape.value(input).shape;
    if (in_shape.size() != 4 || in_shape[1] != cfg.in_channels() || in_shape[2] != cfg.tile ||
        in_shape[3] != cfg.tile)
        throw ConfigError("decomposer input does not match config");
    if (params.blocks.size() != block_names().size())
        throw ConfigError("decomposer params have the wrong block count");

    std::vector<int> ids;
    ids.reserve(params.blocks.size());
    for (const auto& b : params.blocks)
        ids.push_back(params_need_grad ? tape.leaf(b) : tape.constant(b));
    if (param_ids) *param_ids = ids;

    const std::vector<int> w = cfg.widths();
    auto pw = [&](int i) { return ids[2 * i]; };
    auto pb = [&](int i) { return ids[2 * i + 1]; };

    // encoder
    std::vector<int> enc(kDepth + 1);
    kernels::ConvShape lift{cfg.in_channels(), cfg.tile, cfg.tile, w[0], 1, 1, 0};
    enc[0] = tape.leaky_relu(tape.conv2d(input, pw(0), pb(0), lift), T(0.2));
    int res = cfg.tile;
    for (int i = 1; i <= kDepth; ++i) {
        kernels::ConvShape s{w[i - 1], res, res, w[i], 4, 2, 1};
        enc[i] = tape.leaky_relu(tape.conv2d(enc[i - 1], pw(i), pb(i), s), T(0.2));
        res /= 2;
    }

    // color head from the bottleneck
    const int gap = tape.global_avg_spatial(enc[kDepth]);
    const int cw = ids[2 * (2 * (kDepth + 1)) + 4];  // color.weight
    const int cb = ids[2 * (2 * (kDepth + 1)) + 5];
    const int color = tape.exp_op(tape.affine(gap, cw, cb));

    // decoder: concat skip, conv, leaky, upsample; fusion conv at the end
    int z = enc[kDepth];
    int zw = w[kDepth];
    for (int i = 0; i < kDepth; ++i) {
        const int skip = enc[kDepth - i];
        const int skip_w = w[kDepth - i];
        const int out_w = w[kDepth - 1 - i];
        kernels::ConvShape s{zw + skip_w, res, res, out_w, 5, 1, 2};
        const int di = kDepth + 1 + i;
        z = tape.upsample2x(tape.leaky_relu(tape.conv2d(tape.concat_channels(z, skip), pw(di), pb(di), s), T(0.2)));
        zw = out_w;
        res *= 2;
    }
    kernels::ConvShape fuse{zw + w[0], res, res, w[0], 5, 1, 2};
    const int dfuse = 2 * kDepth + 1;
    z = tape.leaky_relu(tape.conv2d(tape.concat_channels(z, enc[0]), pw(dfuse), pb(dfuse), fuse), T(0.2));

    // albedo / shading heads
    const int ha = 2 * (kDepth + 1);
    const int hs = ha + 1;
    kernels::ConvShape head_a{w[0], res, res, 3, 1, 1, 0};
    kernels::ConvShape head_s{w[0], res, res, 1, 1, 1, 0};
    Heads out;
    out.albedo = tape.affine_map(tape.tanh_op(tape.conv2d(z, pw(ha), pb(ha), head_a)), T(0.5), T(0.5));
    out.shading = tape.affine_map(tape.tanh_op(tape.conv2d(z, pw(hs), pb(hs), head_s)), T(0.5), T(0.5));
    out.color = color;
    return out;
}

// Convenience value-only decomposition of a batch of RGB tiles.
template <typename T>
void decompose_tiles(const DecomposerParams<T>& params, const TensorT<T>& rgb, TensorT<T>& albedo,
                     TensorT<T>& shading, TensorT<T>& color) {
    ad::Tape<T> tape;
    const Heads h = forward(tape, params, tape.constant(assemble_input(params.cfg, rgb)));
    albedo = tape.value(h.albedo);
    shading = tape.value(h.shading);
    color = tape.value(h.color);
}

// shadow <- w * shadow + (1-w) * current
template <typename T>
void ema_update(DecomposerParams<T>& shadow, const DecomposerParams<T>& current, T w) {
    if (shadow.blocks.size() != current.blocks.size()) throw ConfigError("ema: mismatched params");
    for (size_t i = 0; i < shadow.blocks.size(); ++i) {
        auto& s = shadow.blocks[i];
        const auto& c = current.blocks[i];
        if (!s.same_shape(c)) throw ConfigError("ema: mismatched block shapes");
        for (size_t e = 0; e < s.size(); ++e) s.data[e] = w * s.data[e] + (T(1) - w) * c.data[e];
    }
}

template <typename T>
DecomposerParams<T> average_params(const std::vector<DecomposerParams<T>>& list) {
    if (list.empty()) throw ConfigError("average_params needs at least one input");
    DecomposerParams<T> out = zero_params<T>(list[0].cfg);
    for (const auto& p : list)
        for (size_t i = 0; i < out.blocks.size(); ++i) {
            if (!out.blocks[i].same_shape(p.blocks[i])) throw ConfigError("average_params: shape mismatch");
            for (size_t e = 0; e < out.blocks[i].size(); ++e) out.blocks[i].data[e] += p.blocks[i].data[e];
        }
    const T inv = T(1) / static_cast<T>(list.size());
    for (auto& b : out.blocks)
        for (auto& v : b.data) v *= inv;
    return out;
}

// Archive adapters; block names are prefixed ("model.enc0.weight", ...).
template <typename T>
void add_blocks(ckpt::Archive<T>& a, const std::string& prefix, const DecomposerParams<T>& p) {
    const auto names = block_names();
    for (size_t i = 0; i < p.blocks.size(); ++i) a.add(prefix + names[i], p.blocks[i]);
}

template <typename T>
DecomposerParams<T> from_archive(const ckpt::Archive<T>& a, const std::string& prefix,
                                 const DecomposerConfig& cfg) {
    DecomposerParams<T> p = zero_params<T>(cfg);
    const auto names = block_names();
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        const TensorT<T>* b = a.find(prefix + names[i]);
        if (!b) throw IoError("checkpoint is missing block " + prefix + names[i]);
        if (!b->same_shape(p.blocks[i])) throw IoError("checkpoint block " + prefix + names[i] + " has the wrong shape");
        p.blocks[i] = *b;
    }
    return p;
}

}  // namespace iik::dec
