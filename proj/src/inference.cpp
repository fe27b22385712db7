#include "iik/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "iik/d4.hpp"
#include "iik/field.hpp"

namespace iik::infer {

namespace {

constexpr int kChunk = 4;  // tiles per model call

void check_image(const Tensor& image) {
    if (image.rank() != 3 || image.shape[0] != 3) throw ConfigError("image must be (3,H,W)");
}

// Largest nominal spacing that keeps consecutive tiles overlapping when
// both may jitter by spacing/4 toward each other: 1.5 * spacing <= tile.
int axis_tile_count(int length, int tile, int requested) {
    const int span = length - tile;
    if (span == 0) return std::max(requested, 1);
    const int max_spacing = 2 * tile / 3;
    const int needed = 1 + (span + max_spacing - 1) / max_spacing;
    return std::max(requested, needed);
}

Tensor crop(const Tensor& image, int y, int x, int t) {
    const int h = image.shape[1], w = image.shape[2];
    Tensor out({image.shape[0], t, t});
    for (int ch = 0; ch < image.shape[0]; ++ch)
        for (int r = 0; r < t; ++r)
            std::memcpy(out.ptr() + (static_cast<size_t>(ch) * t + r) * t,
                        image.ptr() + (static_cast<size_t>(ch) * h + y + r) * w + x,
                        sizeof(double) * static_cast<size_t>(t));
    return out;
}

// Apply a square symmetry to every (C,t,t) example of a batch.
Tensor apply_batch(const d4::Elem& e, const Tensor& batch) {
    const int n = batch.shape[0], c = batch.shape[1], t = batch.shape[2];
    Tensor out(batch.shape);
    const size_t ex = static_cast<size_t>(c) * t * t;
    for (int i = 0; i < n; ++i) {
        Tensor one({c, t, t});
        std::memcpy(one.ptr(), batch.ptr() + i * ex, sizeof(double) * ex);
        const Tensor mapped = d4::apply(e, one);
        std::memcpy(out.ptr() + i * ex, mapped.ptr(), sizeof(double) * ex);
    }
    return out;
}

// Averages g^-1(model(g(tile))) over all eight square symmetries.
class OrbitTileModel : public TileModel {
  public:
    explicit OrbitTileModel(const TileModel& base) : base_(base) {}
    int tile() const override { return base_.tile(); }

    void run(const Tensor& rgb, Tensor& albedo, Tensor& shading, Tensor& color) const override {
        const int n = rgb.shape[0], t = rgb.shape[2];
        albedo = Tensor({n, 3, t, t});
        shading = Tensor({n, 1, t, t});
        color = Tensor({n, 3});
        for (int gi = 0; gi < d4::kCount; ++gi) {
            const d4::Elem g = d4::element(gi);
            const d4::Elem ginv = d4::inverse(g);
            Tensor a, s, c;
            base_.run(apply_batch(g, rgb), a, s, c);
            a = apply_batch(ginv, a);
            s = apply_batch(ginv, s);
            for (size_t i = 0; i < albedo.size(); ++i) albedo.data[i] += a.data[i];
            for (size_t i = 0; i < shading.size(); ++i) shading.data[i] += s.data[i];
            for (size_t i = 0; i < color.size(); ++i) color.data[i] += c.data[i];
        }
        const double inv = 1.0 / d4::kCount;
        for (auto& v : albedo.data) v *= inv;
        for (auto& v : shading.data) v *= inv;
        for (auto& v : color.data) v *= inv;
    }

  private:
    const TileModel& base_;
};

Tensor resize3(const Tensor& chw, int h, int w) {
    return (chw.shape[1] == h && chw.shape[2] == w) ? chw : field::resize(chw, h, w);
}

void add_scaled(Tensor& acc, const Tensor& t, double w) {
    for (size_t i = 0; i < acc.size(); ++i) acc.data[i] += w * t.data[i];
}

}  // namespace

std::string orbit_name(Orbit o) {
    switch (o) {
        case Orbit::kNone: return "none";
        case Orbit::kDiscreteImage: return "discrete_image";
        case Orbit::kDiscreteTile: return "discrete_tile";
    }
    throw ConfigError("bad orbit mode");
}

Orbit orbit_from_name(const std::string& name) {
    if (name == "none") return Orbit::kNone;
    if (name == "discrete_image") return Orbit::kDiscreteImage;
    if (name == "discrete_tile") return Orbit::kDiscreteTile;
    throw ConfigError("unknown orbit mode: " + name);
}

void AveragingConfig::validate() const {
    if (n_tiles < 1) throw ConfigError("n_tiles must be >= 1");
    if (n_scales < 1) throw ConfigError("n_scales must be >= 1");
    if (!(window_k > 0.0) || !std::isfinite(window_k)) throw ConfigError("window_k must be positive");
    polish_cfg.validate();
}

nlohmann::json AveragingConfig::to_json() const {
    return {{"n_tiles", n_tiles},
            {"n_scales", n_scales},
            {"orbit", orbit_name(orbit)},
            {"use_location_code", use_location_code},
            {"polish", polish ? "per_scale_and_final" : "off"},
            {"polish_cfg", polish_cfg.to_json()},
            {"window_k", window_k},
            {"seed", seed}};
}

AveragingConfig AveragingConfig::from_json(const nlohmann::json& j) {
    AveragingConfig c;
    c.n_tiles = j.value("n_tiles", c.n_tiles);
    c.n_scales = j.value("n_scales", c.n_scales);
    if (j.contains("orbit")) c.orbit = orbit_from_name(j.at("orbit").get<std::string>());
    c.use_location_code = j.value("use_location_code", c.use_location_code);
    if (j.contains("polish")) {
        const std::string p = j.at("polish").get<std::string>();
        if (p != "off" && p != "per_scale_and_final") throw ConfigError("unknown polish mode: " + p);
        c.polish = p == "per_scale_and_final";
    }
    if (j.contains("polish_cfg")) c.polish_cfg = polish::PolishConfig::from_json(j.at("polish_cfg"));
    c.window_k = j.value("window_k", c.window_k);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

AveragingConfig averaging_preset(const std::string& key) {
    AveragingConfig c;
    if (key == "base") return c;
    c.n_tiles = 15;
    c.n_scales = 5;
    if (key == "bba") return c;
    if (key == "np") {
        c.use_location_code = false;
        return c;
    }
    c.polish = true;
    if (key == "bbap") return c;
    if (key == "bbaf") {
        c.orbit = Orbit::kDiscreteImage;
        return c;
    }
    if (key == "bbat") {
        c.orbit = Orbit::kDiscreteTile;
        return c;
    }
    throw ConfigError("unknown averaging preset: " + key);
}

Tensor weight_window(int size, double k) {
    if (size < 1) throw ConfigError("window size must be >= 1");
    if (!(k > 0.0)) throw ConfigError("window_k must be positive");
    std::vector<double> ramp(static_cast<size_t>(size));
    const double denom = 1.0 - std::exp(-k);
    for (int i = 0; i < size; ++i)
        ramp[static_cast<size_t>(i)] = std::min(1.0, (1.0 - std::exp(-(i + 1) * k / 40.0)) / denom);
    Tensor out({1, size, size});
    for (int y = 0; y < size; ++y) {
        const double wy = std::min(ramp[static_cast<size_t>(y)], ramp[static_cast<size_t>(size - 1 - y)]);
        for (int x = 0; x < size; ++x) {
            const double wx = std::min(ramp[static_cast<size_t>(x)], ramp[static_cast<size_t>(size - 1 - x)]);
            out.data[static_cast<size_t>(y) * size + x] = std::min(wx, wy);
        }
    }
    return out;
}

TileLayout tile_grid(int image_h, int image_w, int n_tiles, int tile, Rng& rng) {
    if (tile < 1) throw ConfigError("tile must be >= 1");
    if (image_h < tile || image_w < tile) throw ConfigError("image smaller than tile");
    if (n_tiles < 1) throw ConfigError("n_tiles must be >= 1");

    const int ny = axis_tile_count(image_h, tile, n_tiles);
    const int nx = axis_tile_count(image_w, tile, n_tiles);
    const double sy = ny > 1 ? static_cast<double>(image_h - tile) / (ny - 1) : 0.0;
    const double sx = nx > 1 ? static_cast<double>(image_w - tile) / (nx - 1) : 0.0;

    TileLayout layout;
    layout.tile = tile;
    layout.height = image_h;
    layout.width = image_w;
    layout.rects.reserve(static_cast<size_t>(ny) * nx);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            // fixed draw count per tile keeps layouts comparable across pinning
            const double dy = rng.uniform(-sy / 4.0, sy / 4.0);
            const double dx = rng.uniform(-sx / 4.0, sx / 4.0);
            TileRect r;
            if (iy == 0)
                r.y = 0;
            else if (iy == ny - 1)
                r.y = image_h - tile;
            else
                r.y = std::clamp(static_cast<int>(std::llround(iy * sy + dy)), 0, image_h - tile);
            if (ix == 0)
                r.x = 0;
            else if (ix == nx - 1)
                r.x = image_w - tile;
            else
                r.x = std::clamp(static_cast<int>(std::llround(ix * sx + dx)), 0, image_w - tile);
            layout.rects.push_back(r);
        }

    // difference-array coverage check (prefix sums in place)
    const size_t stride = static_cast<size_t>(image_w) + 1;
    std::vector<int> cov((static_cast<size_t>(image_h) + 1) * stride, 0);
    for (const TileRect& r : layout.rects) {
        cov[static_cast<size_t>(r.y) * stride + r.x] += 1;
        cov[static_cast<size_t>(r.y) * stride + r.x + tile] -= 1;
        cov[(static_cast<size_t>(r.y) + tile) * stride + r.x] -= 1;
        cov[(static_cast<size_t>(r.y) + tile) * stride + r.x + tile] += 1;
    }
    for (int y = 0; y < image_h; ++y)
        for (int x = 0; x < image_w; ++x) {
            const size_t i = static_cast<size_t>(y) * stride + x;
            int c = cov[i];
            if (x > 0) c += cov[i - 1];
            if (y > 0) c += cov[i - stride];
            if (x > 0 && y > 0) c -= cov[i - stride - 1];
            cov[i] = c;
            if (c <= 0) throw ConfigError("tile grid failed to cover the image");
        }
    return layout;
}

Decomposition accumulate_tiles(const TileModel& model, const Tensor& image, const TileLayout& layout,
                               double window_k) {
    check_image(image);
    const int h = image.shape[1], w = image.shape[2];
    const int t = layout.tile;
    if (t != model.tile()) throw ConfigError("layout tile size does not match the model");
    if (layout.height != h || layout.width != w) throw ConfigError("layout built for another image size");
    if (layout.rects.empty()) throw ConfigError("empty tile layout");
    for (const TileRect& r : layout.rects)
        if (r.y < 0 || r.x < 0 || r.y + t > h || r.x + t > w) throw ConfigError("tile out of bounds");

    const Tensor window = weight_window(t, window_k);
    const size_t plane = static_cast<size_t>(h) * w;
    Decomposition d;
    d.albedo = Tensor({3, h, w});
    d.shading = Tensor({1, h, w});
    d.color = Tensor({3, h, w});
    Tensor wacc({1, h, w});

    const int total = static_cast<int>(layout.rects.size());
    for (int lo = 0; lo < total; lo += kChunk) {
        const int n = std::min(kChunk, total - lo);
        Tensor batch({n, 3, t, t});
        const size_t ex = static_cast<size_t>(3) * t * t;
        for (int i = 0; i < n; ++i) {
            const Tensor c = crop(image, layout.rects[static_cast<size_t>(lo + i)].y,
                                  layout.rects[static_cast<size_t>(lo + i)].x, t);
            std::memcpy(batch.ptr() + i * ex, c.ptr(), sizeof(double) * ex);
        }
        Tensor albedo, shading, color;
        model.run(batch, albedo, shading, color);

        for (int i = 0; i < n; ++i) {
            const TileRect r = layout.rects[static_cast<size_t>(lo + i)];
            const double* ta = albedo.ptr() + i * ex;
            const double* ts = shading.ptr() + static_cast<size_t>(i) * t * t;
            const double* tc = color.ptr() + static_cast<size_t>(i) * 3;
            for (int y = 0; y < t; ++y)
                for (int x = 0; x < t; ++x) {
                    const double wgt = window.data[static_cast<size_t>(y) * t + x];
                    const size_t p = static_cast<size_t>(r.y + y) * w + (r.x + x);
                    const size_t q = static_cast<size_t>(y) * t + x;
                    for (int ch = 0; ch < 3; ++ch) {
                        d.albedo.data[ch * plane + p] += wgt * ta[ch * t * t + q];
                        d.color.data[ch * plane + p] += wgt * tc[ch];
                    }
                    d.shading.data[p] += wgt * ts[q];
                    wacc.data[p] += wgt;
                }
        }
    }

    for (size_t p = 0; p < plane; ++p) {
        if (!(wacc.data[p] > 0.0)) throw ConfigError("uncovered pixel in tile layout");
        const double inv = 1.0 / wacc.data[p];
        for (int ch = 0; ch < 3; ++ch) {
            d.albedo.data[ch * plane + p] *= inv;
            d.color.data[ch * plane + p] *= inv;
        }
        d.shading.data[p] *= inv;
    }
    return d;
}

Decomposition average_translations(const TileModel& model, const Tensor& image, int n_tiles,
                                   const AveragingConfig& cfg, Rng& rng) {
    check_image(image);
    const TileLayout layout = tile_grid(image.shape[1], image.shape[2], n_tiles, model.tile(), rng);
    return accumulate_tiles(model, image, layout, cfg.window_k);
}

std::vector<double> scale_factors(int n) {
    if (n < 1) throw ConfigError("n_scales must be >= 1");
    std::vector<double> out(static_cast<size_t>(n));
    if (n == 1) {
        out[0] = 1.0;
        return out;
    }
    for (int i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] = std::pow(2.0, static_cast<double>(i) / (n - 1) - 0.5);
    return out;
}

Decomposition average_scales(const TileModel& model, const Tensor& image, const AveragingConfig& cfg) {
    check_image(image);
    cfg.validate();
    const int h = image.shape[1], w = image.shape[2];
    const std::vector<double> factors = scale_factors(cfg.n_scales);

    Decomposition acc;
    acc.albedo = Tensor({3, h, w});
    acc.shading = Tensor({1, h, w});
    acc.color = Tensor({3, h, w});
    const double uniform = 1.0 / static_cast<double>(factors.size());

    for (size_t i = 0; i < factors.size(); ++i) {
        const double f = factors[i];
        const int sh = static_cast<int>(std::llround(h * f));
        const int sw = static_cast<int>(std::llround(w * f));
        if (sh < model.tile() || sw < model.tile()) throw ConfigError("scaled image below tile size");
        const Tensor scaled = resize3(image, sh, sw);

        Rng rng(cfg.seed, streams::sub(streams::kLayout, static_cast<uint64_t>(i)));
        Decomposition d = average_translations(model, scaled, cfg.n_tiles, cfg, rng);
        d.albedo = resize3(d.albedo, h, w);
        d.shading = resize3(d.shading, h, w);
        d.color = resize3(d.color, h, w);
        if (cfg.polish) polish::polish(image, d, cfg.polish_cfg);

        add_scaled(acc.albedo, d.albedo, uniform);
        add_scaled(acc.shading, d.shading, uniform);
        add_scaled(acc.color, d.color, uniform);
    }
    return acc;
}

Decomposition orbit_average(const TileModel& model, const Tensor& image, const AveragingConfig& cfg) {
    check_image(image);
    const int h = image.shape[1], w = image.shape[2];
    Decomposition acc;
    acc.albedo = Tensor({3, h, w});
    acc.shading = Tensor({1, h, w});
    acc.color = Tensor({3, h, w});
    const double inv = 1.0 / d4::kCount;
    for (int gi = 0; gi < d4::kCount; ++gi) {
        const d4::Elem g = d4::element(gi);
        const d4::Elem ginv = d4::inverse(g);
        const Decomposition d = average_scales(model, d4::apply(g, image), cfg);
        add_scaled(acc.albedo, d4::apply(ginv, d.albedo), inv);
        add_scaled(acc.shading, d4::apply(ginv, d.shading), inv);
        add_scaled(acc.color, d4::apply(ginv, d.color), inv);
    }
    return acc;
}

Decomposition decompose_image(const TileModel& model, const Tensor& image, const AveragingConfig& cfg) {
    check_image(image);
    cfg.validate();
    Decomposition d;
    switch (cfg.orbit) {
        case Orbit::kNone: d = average_scales(model, image, cfg); break;
        case Orbit::kDiscreteImage: d = orbit_average(model, image, cfg); break;
        case Orbit::kDiscreteTile: {
            const OrbitTileModel wrapped(model);
            d = average_scales(wrapped, image, cfg);
            break;
        }
    }
    if (cfg.polish) polish::polish(image, d, cfg.polish_cfg);
    d.residual = residual(image, d);
    return d;
}

}  // namespace iik::infer
