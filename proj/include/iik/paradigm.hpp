#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "iik/field.hpp"
#include "iik/rng.hpp"
#include "iik/tensor.hpp"

// Procedural training data ("paradigms"): piecewise-constant albedos from
// kd trees and mondrians of rotated mondrians, shading fields mixed from
// smoothed-noise dictionaries with mask-replaced regions, and a Gaussian
// illuminant color model.  Samplers are pure functions of (rng state,
// config, pool/dicts), so dictionaries rebuild bit-identically from a seed.

namespace iik::paradigm {

struct ParadigmConfig {
    int tile = 128;

    // albedo kd tree
    int d_max = 6;      // maximum split depth
    int p_min = 1000;   // minimum pixels per cell

    // mondrian of rotated mondrians
    int n_m = 4;              // max grid cells per edge
    int mondrian_entries = 8; // rotated mondrians built per sample
    int grid_lines_min = 2;   // interior grid lines per axis of a dictionary entry
    int grid_lines_max = 6;

    // shading
    int d_smax = 6;
    int p_smin = 1000;
    double s_min = 0.2;
    double s_max = 1.0;
    std::vector<double> sigmas = {3, 6, 12, 16, 24};
    std::vector<double> sigma_weights = {0.2, 0.2, 0.4, 1, 1};
    int perlin_entries = 64;  // noise images per smoothing scale
    int mask_kmax = 4;        // mask count drawn from Uniform{0..mask_kmax}

    int dict_size = 4000;

    void validate() const;
    uint64_t config_hash() const;
};

struct ColorPool {
    std::vector<std::array<double, 3>> colors;
};

// Per-scale dictionaries of smoothed unit-normal images, float storage.
struct PerlinDicts {
    std::vector<std::vector<Tensor32>> entries;  // [sigma][entry], (1,tile,tile)
};

struct ParadigmExample {
    Tensor albedo;        // (3,tile,tile)
    Tensor shading;       // (1,tile,tile)
    field::Color color;
    Tensor image;         // compose(albedo, shading, color), exactly
};

// Pixels drawn uniformly over (image, location), divided by the square
// root of their mean-channel intensity (floored at 1e-3).
ColorPool build_color_pool(const std::vector<Tensor>& images, int n_samples, Rng& rng);

Tensor sample_albedo_kd(Rng& rng, const ColorPool& pool, const ParadigmConfig& cfg);
Tensor sample_albedo_mondrian(Rng& rng, const ColorPool& pool, const ParadigmConfig& cfg);

// Fair coin between the kd and mondrian spatial models; reports the
// branch taken when asked (used by tests and the preview tool).
Tensor sample_albedo(Rng& rng, const ColorPool& pool, const ParadigmConfig& cfg,
                     bool* used_kd = nullptr);

PerlinDicts build_perlin_dictionaries(Rng& rng, const ParadigmConfig& cfg, int entries_per_sigma);

// Weighted sum of one random entry per scale.
Tensor sample_shading_component(Rng& rng, const PerlinDicts& dicts, const ParadigmConfig& cfg);

// Background component, K ~ Uniform{0..mask_kmax} mask replacements, then
// an affine rescale that attains [s_min, s_max] exactly.
Tensor sample_shading(Rng& rng, const PerlinDicts& dicts, const ParadigmConfig& cfg);

// 0.5*(1,1,1) + 0.5*xi, xi ~ N(0,I), clamped to [0.05, 2.0] per channel.
field::Color sample_color(Rng& rng);

ParadigmExample sample_example(Rng& rng, const ColorPool& pool, const PerlinDicts& dicts,
                               const ParadigmConfig& cfg);

// ------------------------------------------------------- dictionaries --

// A cached set of tiles plus the manifest describing how it was built.
struct TileDictionary {
    std::string kind;        // "albedo", "shading", "real", "ingested"
    int tile = 0;
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    std::vector<Tensor32> tiles;

    const Tensor32& draw(Rng& rng) const;
};

TileDictionary build_albedo_dictionary(uint64_t seed, const ColorPool& pool,
                                       const ParadigmConfig& cfg, int size);
TileDictionary build_shading_dictionary(uint64_t seed, const ParadigmConfig& cfg, int size);

// Random tile-sized crops from real images (shortest edge upscaled to the
// tile size first when an image is too small).
TileDictionary build_real_dictionary(uint64_t seed, const std::vector<Tensor>& images,
                                     const ParadigmConfig& cfg, int size);

// Directory of IIKF tensors plus manifest.json; round-trips bit-exactly.
void save_dictionary(const std::string& dir, const TileDictionary& dict);
TileDictionary load_dictionary(const std::string& dir);

// Loads externally produced tiles (*.iikf or *.png) as a dictionary.
TileDictionary ingest_tile_dictionary(const std::string& dir, int expected_tile);

}  // namespace iik::paradigm
