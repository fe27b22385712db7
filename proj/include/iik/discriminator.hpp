#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "iik/autodiff.hpp"
#include "iik/checkpoint.hpp"
#include "iik/rng.hpp"
#include "iik/tensor.hpp"

// The patch discriminator: a plain conv stack scoring a 4-channel
// (albedo ++ shading) tile pair with one score per overlapping patch.  The
// patch size is the receptive field R_d of a score cell, so presets are
// keyed by R_d.  Leaky ReLU 0.2 between layers, nothing after the last.
//
// Spectral normalization is a parameter projection applied between
// optimizer steps: one power-iteration step per layer, kernel divided by
// the estimated top singular value.  The iteration vectors live in the
// parameter block list so checkpoints resume bit-exactly.

namespace iik::disc {

struct ConvSpec {
    int kernel = 4;
    int stride = 2;
    int pad = 1;
    int width = 64;
};

// How the two hinge losses combine.  kUnified (default): paradigm pairs
// are pushed to score >= +1, decomposed-real pairs to <= -1, and the
// generator pulls decomposed-real scores back toward +1; the
// discriminator loss is the pooled mean over both batches.  The two
// literal variants reproduce printed sign conventions that disagree with
// each other: kLiteralMain keeps the same discriminator loss but the
// generator minimizes the raw mean score; kLiteralE flips the sides
// (paradigm <= -1, real >= +1) and also minimizes the raw mean score,
// summing the two discriminator terms instead of pooling.
enum class HingeVariant { kUnified, kLiteralMain, kLiteralE };

struct DiscriminatorConfig {
    std::vector<ConvSpec> layers;
    int in_channels = 4;
    HingeVariant hinge = HingeVariant::kUnified;

    void validate() const;
    // Spatial size of the score map for a square input.
    int score_size(int input_size) const;

    // Preset stacks keyed by receptive field; supported keys 10, 22, 29,
    // 48 and 128.  The default discriminator is the R_d = 22 stack.
    static DiscriminatorConfig preset(int receptive_field);

    nlohmann::json to_json() const;
    static DiscriminatorConfig from_json(const nlohmann::json& j);
};

// Standard receptive-field recurrence: rf += (k - 1) * jump, jump *= stride.
int receptive_field(const std::vector<ConvSpec>& layers);
int stride_product(const std::vector<ConvSpec>& layers);

// Blocks per layer: convN.weight, convN.bias, convN.sn_u (the persistent
// power-iteration vector, length = layer width).
std::vector<std::string> block_names(const DiscriminatorConfig& cfg);
std::vector<std::vector<int>> block_shapes(const DiscriminatorConfig& cfg);

template <typename T>
struct DiscriminatorParams {
    DiscriminatorConfig cfg;
    std::vector<TensorT<T>> blocks;

    template <typename U>
    DiscriminatorParams<U> cast() const {
        DiscriminatorParams<U> out;
        out.cfg = cfg;
        out.blocks.reserve(blocks.size());
        for (const auto& b : blocks) out.blocks.push_back(b.template cast<U>());
        return out;
    }
};

template <typename T>
DiscriminatorParams<T> zero_params(const DiscriminatorConfig& cfg) {
    cfg.validate();
    DiscriminatorParams<T> p;
    p.cfg = cfg;
    for (const auto& s : block_shapes(cfg)) p.blocks.emplace_back(s);
    // unit iteration vectors even for zero kernels, so normalization is a no-op
    const auto names = block_names(cfg);
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i].find(".sn_u") != std::string::npos) p.blocks[i].data[0] = T(1);
    return p;
}

template <typename T>
DiscriminatorParams<T> init_params(const DiscriminatorConfig& cfg, uint64_t seed) {
    DiscriminatorParams<T> p = zero_params<T>(cfg);
    const auto names = block_names(cfg);
    Rng rng(seed, streams::kInit);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        auto& b = p.blocks[i];
        if (names[i].find(".weight") != std::string::npos) {
            size_t fan_in = 1;
            for (int d = 1; d < b.rank(); ++d) fan_in *= static_cast<size_t>(b.shape[d]);
            const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (auto& v : b.data) v = static_cast<T>(scale * rng.normal());
        } else if (names[i].find(".sn_u") != std::string::npos) {
            double norm2 = 0.0;
            for (auto& v : b.data) {
                v = static_cast<T>(rng.normal());
                norm2 += static_cast<double>(v) * static_cast<double>(v);
            }
            const T inv = static_cast<T>(1.0 / std::sqrt(norm2));
            for (auto& v : b.data) v *= inv;
        }
    }
    return p;
}

// One power-iteration step per layer, then kernel /= estimated top
// singular value.  Layers whose estimate is ~0 (e.g. all-zero kernels)
// are left untouched.
template <typename T>
void spectral_normalize(DiscriminatorParams<T>& p) {
    for (size_t li = 0; li < p.cfg.layers.size(); ++li) {
        auto& w = p.blocks[3 * li];      // weight
        auto& u = p.blocks[3 * li + 2];  // sn_u
        const size_t rows = static_cast<size_t>(w.shape[0]);
        const size_t cols = w.size() / rows;

        // v = normalize(W^T u); u' = normalize(W v); sigma = |W v|
        std::vector<double> v(cols, 0.0);
        for (size_t r = 0; r < rows; ++r) {
            const double ur = static_cast<double>(u.data[r]);
            const T* wr = w.ptr() + r * cols;
            for (size_t c = 0; c < cols; ++c) v[c] += ur * static_cast<double>(wr[c]);
        }
        double vn = 0.0;
        for (double x : v) vn += x * x;
        vn = std::sqrt(vn);
        if (vn < 1e-30) continue;
        for (double& x : v) x /= vn;

        std::vector<double> wu(rows, 0.0);
        for (size_t r = 0; r < rows; ++r) {
            const T* wr = w.ptr() + r * cols;
            double acc = 0.0;
            for (size_t c = 0; c < cols; ++c) acc += static_cast<double>(wr[c]) * v[c];
            wu[r] = acc;
        }
        double sigma = 0.0;
        for (double x : wu) sigma += x * x;
        sigma = std::sqrt(sigma);
        if (sigma < 1e-30) continue;

        for (size_t r = 0; r < rows; ++r) u.data[r] = static_cast<T>(wu[r] / sigma);
        const T inv = static_cast<T>(1.0 / sigma);
        for (auto& x : w.data) x *= inv;
    }
}

// Runs the conv stack on the tape.  `pair` must be (N, in_channels, H, W).
// When param_ids is given it receives one id per block, -1 for the sn_u
// blocks (they are state, not differentiable parameters).
template <typename T>
int score_map(ad::Tape<T>& tape, const DiscriminatorParams<T>& params, int pair,
              std::vector<int>* param_ids = nullptr, bool params_need_grad = false) {
    const DiscriminatorConfig& cfg = params.cfg;
    const auto& in_shape = tape.value(pair).shape;
    if (in_shape.size() != 4 || in_shape[1] != cfg.in_channels)
        throw ConfigError("discriminator input must be (N, in_channels, H, W)");
    if (params.blocks.size() != 3 * cfg.layers.size())
        throw ConfigError("discriminator params have the wrong block count");

    std::vector<int> ids(params.blocks.size(), -1);
    int x = pair;
    int c = cfg.in_channels, h = in_shape[2], w = in_shape[3];
    for (size_t li = 0; li < cfg.layers.size(); ++li) {
        const ConvSpec& L = cfg.layers[li];
        kernels::ConvShape s{c, h, w, L.width, L.kernel, L.stride, L.pad};
        s.validate();
        const int wid = params_need_grad ? tape.leaf(params.blocks[3 * li]) : tape.constant(params.blocks[3 * li]);
        const int bid =
            params_need_grad ? tape.leaf(params.blocks[3 * li + 1]) : tape.constant(params.blocks[3 * li + 1]);
        ids[3 * li] = wid;
        ids[3 * li + 1] = bid;
        x = tape.conv2d(x, wid, bid, s);
        if (li + 1 < cfg.layers.size()) x = tape.leaky_relu(x, T(0.2));
        c = L.width;
        h = s.out_h();
        w = s.out_w();
    }
    if (param_ids) *param_ids = ids;
    return x;
}

// Hinge losses over score maps.  With F = 0 everywhere both losses are 1.
template <typename T>
int disc_loss(ad::Tape<T>& tape, int f_paradigm, int f_generated,
              HingeVariant v = HingeVariant::kUnified) {
    if (v == HingeVariant::kLiteralE)
        return tape.add(tape.hinge_mean(f_paradigm, T(1)), tape.hinge_mean(f_generated, T(-1)));
    return tape.scalar_comb({tape.hinge_mean(f_paradigm, T(-1)), tape.hinge_mean(f_generated, T(1))},
                            {T(0.5), T(0.5)});
}

template <typename T>
int gen_adv_loss(ad::Tape<T>& tape, int f_generated, HingeVariant v = HingeVariant::kUnified) {
    if (v == HingeVariant::kUnified) return tape.hinge_mean(f_generated, T(-1));
    return tape.mean_all(f_generated);
}

// Empirical receptive field: backprop from the score cell nearest the map
// center on random params and measure the bounding box of nonzero input
// gradient.  Equals receptive_field() exactly for every preset.
int probe_footprint(const DiscriminatorConfig& cfg, uint64_t seed, int input_size = 128);

// Archive adapters, mirroring the decomposer ones.
template <typename T>
void add_blocks(ckpt::Archive<T>& a, const std::string& prefix, const DiscriminatorParams<T>& p) {
    const auto names = block_names(p.cfg);
    for (size_t i = 0; i < p.blocks.size(); ++i) a.add(prefix + names[i], p.blocks[i]);
}

template <typename T>
DiscriminatorParams<T> from_archive(const ckpt::Archive<T>& a, const std::string& prefix,
                                    const DiscriminatorConfig& cfg) {
    DiscriminatorParams<T> p = zero_params<T>(cfg);
    const auto names = block_names(cfg);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        const TensorT<T>* b = a.find(prefix + names[i]);
        if (!b) throw IoError("checkpoint is missing block " + prefix + names[i]);
        if (!b->same_shape(p.blocks[i]))
            throw IoError("checkpoint block " + prefix + names[i] + " has the wrong shape");
        p.blocks[i] = *b;
    }
    return p;
}

}  // namespace iik::disc
