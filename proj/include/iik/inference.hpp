#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iik/decomposer.hpp"
#include "iik/decomposition.hpp"
#include "iik/polish.hpp"
#include "iik/rng.hpp"
#include "json.hpp"

// Full-image decomposition by averaging tile decompositions over
// translations (an overlapping jittered grid, blended with a boundary-
// suppressing window), scales (a geometric ladder between 1/sqrt(2) and
// sqrt(2)) and optionally the eight square symmetries.  Averaging over the
// symmetry orbit either transforms the whole image eight ways
// (discrete-image) or every tile eight ways inside the pipeline
// (discrete-tile).

namespace iik::infer {

enum class Orbit { kNone, kDiscreteImage, kDiscreteTile };

std::string orbit_name(Orbit o);
Orbit orbit_from_name(const std::string& name);

struct AveragingConfig {
    int n_tiles = 7;   // base tile grid per axis (raised if coverage needs more)
    int n_scales = 3;
    Orbit orbit = Orbit::kNone;
    bool use_location_code = true;
    bool polish = false;  // polish each scale's average and the final average
    polish::PolishConfig polish_cfg;
    double window_k = 1.0;  // blending-window ramp steepness
    uint64_t seed = 0;      // tile-grid jitter

    void validate() const;
    nlohmann::json to_json() const;
    static AveragingConfig from_json(const nlohmann::json& j);
};

// base | bba | np | bbap | bbaf | bbat
AveragingConfig averaging_preset(const std::string& key);

// Batch decomposer for fixed-size square tiles.  Implementations must be
// pure functions of the input batch.
class TileModel {
  public:
    virtual ~TileModel() = default;
    virtual int tile() const = 0;
    // rgb (N,3,t,t) -> albedo (N,3,t,t), shading (N,1,t,t), color (N,3)
    virtual void run(const Tensor& rgb, Tensor& albedo, Tensor& shading, Tensor& color) const = 0;
};

// Network-backed model; forwards in the parameter precision.
template <typename T>
class NetworkModel : public TileModel {
  public:
    explicit NetworkModel(dec::DecomposerParams<T> params) : params_(std::move(params)) {}
    int tile() const override { return params_.cfg.tile; }
    void run(const Tensor& rgb, Tensor& albedo, Tensor& shading, Tensor& color) const override {
        TensorT<T> a, s, c;
        dec::decompose_tiles(params_, rgb.cast<T>(), a, s, c);
        albedo = a.template cast<double>();
        shading = s.template cast<double>();
        color = c.template cast<double>();
    }

  private:
    dec::DecomposerParams<T> params_;
};

// (1,size,size) blending window: pointwise minimum of four per-edge ramps
// w(j) = min(1, (1 - exp(-j k / 40)) / (1 - exp(-k))) with j the 1-based
// distance to the edge.  Values in (0,1], 1 at >= 40 px from every edge.
Tensor weight_window(int size = 128, double k = 1.0);

struct TileRect {
    int y = 0;
    int x = 0;
};

struct TileLayout {
    int tile = 128;
    int height = 0;
    int width = 0;
    std::vector<TileRect> rects;
};

// Jittered overlapping grid covering the image.  Corner tiles sit flush in
// the corners and border tiles stay pinned to their border (jitter would
// strip coverage there); interior coordinates move by U[-spacing/4,
// +spacing/4].  The per-axis tile count grows beyond n_tiles when the image
// is too large for n_tiles to cover.  Coverage is verified before returning.
TileLayout tile_grid(int image_h, int image_w, int n_tiles, int tile, Rng& rng);

// Weighted accumulation of per-tile decompositions over an explicit layout;
// tiles are accumulated serially in layout order so results do not depend
// on batching.  Produces the per-pixel color field.
Decomposition accumulate_tiles(const TileModel& model, const Tensor& image, const TileLayout& layout,
                               double window_k = 1.0);

Decomposition average_translations(const TileModel& model, const Tensor& image, int n_tiles,
                                   const AveragingConfig& cfg, Rng& rng);

// n geometric factors from 1/sqrt(2) to sqrt(2); exactly 1 in the middle
// when n is odd, {1} when n == 1.
std::vector<double> scale_factors(int n);

// Uniform average over scales of resized translation averages, each mapped
// back to native resolution.  Scale i draws its layout from
// Rng(cfg.seed, sub(kLayout, i)), so every call with the same config and
// image dimensions lays tiles identically.
Decomposition average_scales(const TileModel& model, const Tensor& image, const AveragingConfig& cfg);

// Average of g^-1(average_scales(g(image))) over the eight square
// symmetries.  Because each branch reuses the same layout seeds, the orbit
// sum for a transformed input is the same eight terms reindexed, making
// decompose(g(I)) = g(decompose(I)) hold to rounding error.
Decomposition orbit_average(const TileModel& model, const Tensor& image, const AveragingConfig& cfg);

// Full pipeline: orbit/scale/translation dispatch per cfg, then optional
// final polish; the residual is attached in all cases.
Decomposition decompose_image(const TileModel& model, const Tensor& image, const AveragingConfig& cfg);

}  // namespace iik::infer
