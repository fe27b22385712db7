#include "iik/paradigm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

#include "iik/image_io.hpp"
#include "iik/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace iik::paradigm {

namespace {

constexpr double kIntensityFloor = 1e-3;
constexpr double kColorClampLo = 0.05;
constexpr double kColorClampHi = 2.0;

// ------------------------------------------------------------ kd tree --

struct Rect {
    int y0, x0, y1, x1;  // half-open
    int height() const { return y1 - y0; }
    int width() const { return x1 - x0; }
};

// Depth-first split, low side first; axis alternates from a random start,
// split position uniform over cuts leaving >= p_min pixels on both sides.
void kd_split(Rng& rng, const Rect& r, int depth, int axis, int d_max, int p_min,
              std::vector<Rect>& leaves) {
    if (depth < d_max) {
        const bool along_x = (axis & 1) != 0;
        const int extent = along_x ? r.width() : r.height();
        const int other = along_x ? r.height() : r.width();
        const int lo = std::max(1, (p_min + other - 1) / other);
        if (extent - lo >= lo) {
            const int cut = lo + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(extent - 2 * lo + 1)));
            Rect a = r, b = r;
            if (along_x) {
                a.x1 = r.x0 + cut;
                b.x0 = r.x0 + cut;
            } else {
                a.y1 = r.y0 + cut;
                b.y0 = r.y0 + cut;
            }
            kd_split(rng, a, depth + 1, axis + 1, d_max, p_min, leaves);
            kd_split(rng, b, depth + 1, axis + 1, d_max, p_min, leaves);
            return;
        }
    }
    leaves.push_back(r);
}

std::vector<Rect> kd_leaves(Rng& rng, int tile, int d_max, int p_min) {
    std::vector<Rect> leaves;
    const int start_axis = rng.coin() ? 1 : 0;
    kd_split(rng, Rect{0, 0, tile, tile}, 0, start_axis, d_max, p_min, leaves);
    return leaves;
}

// -------------------------------------------------- rotated mondrians --

struct RotatedMondrian {
    int size = 0;                                     // pre-crop support, 2*tile
    std::vector<std::array<double, 3>> cell_colors;   // indexed by label; may be empty
    std::vector<int32_t> labels;                      // size*size, -1 off-support
    int box_y0 = 0, box_x0 = 0, box_side = 0;         // inscribed axis-aligned square
};

std::vector<int> random_boundaries(Rng& rng, int size, int lines_min, int lines_max) {
    const int n = lines_min + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(lines_max - lines_min + 1)));
    std::set<int> cuts;
    while (static_cast<int>(cuts.size()) < n)
        cuts.insert(1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(size - 1))));
    std::vector<int> b;
    b.push_back(0);
    b.insert(b.end(), cuts.begin(), cuts.end());
    b.push_back(size);
    return b;
}

// Axis-aligned color grid, rotated by a uniform angle in [0, pi) with
// nearest-neighbor resampling.  Only the inscribed square is ever read,
// so no off-support pixel leaks into a sample.
RotatedMondrian build_rotated_mondrian(Rng& rng, const ColorPool* pool, const ParadigmConfig& cfg) {
    RotatedMondrian m;
    m.size = 2 * cfg.tile;
    const int s = m.size;
    const std::vector<int> by = random_boundaries(rng, s, cfg.grid_lines_min, cfg.grid_lines_max);
    const std::vector<int> bx = random_boundaries(rng, s, cfg.grid_lines_min, cfg.grid_lines_max);
    const int ny = static_cast<int>(by.size()) - 1;
    const int nx = static_cast<int>(bx.size()) - 1;

    if (pool) {
        m.cell_colors.resize(static_cast<size_t>(ny) * nx);
        for (auto& c : m.cell_colors) c = pool->colors[rng.uniform_int(pool->colors.size())];
    }

    std::vector<int32_t> grid(static_cast<size_t>(s) * s);
    for (int cy = 0; cy < ny; ++cy)
        for (int cx = 0; cx < nx; ++cx)
            for (int y = by[cy]; y < by[cy + 1]; ++y)
                std::fill(grid.begin() + static_cast<size_t>(y) * s + bx[cx],
                          grid.begin() + static_cast<size_t>(y) * s + bx[cx + 1],
                          static_cast<int32_t>(cy * nx + cx));

    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double c = std::cos(theta), sn = std::sin(theta);
    const double ctr = (s - 1) / 2.0;
    m.labels.assign(static_cast<size_t>(s) * s, -1);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double dx = x - ctr, dy = y - ctr;
            const int qx = static_cast<int>(std::lround(ctr + c * dx + sn * dy));
            const int qy = static_cast<int>(std::lround(ctr - sn * dx + c * dy));
            if (qx >= 0 && qx < s && qy >= 0 && qy < s)
                m.labels[static_cast<size_t>(y) * s + x] = grid[static_cast<size_t>(qy) * s + qx];
        }

    const int half = static_cast<int>(std::floor(s / (2.0 * (std::abs(c) + std::abs(sn))))) - 1;
    m.box_side = 2 * half;
    m.box_y0 = static_cast<int>(ctr) - half + 1;
    m.box_x0 = m.box_y0;
    if (m.box_side < cfg.tile) throw ConfigError("tile too small for rotated-mondrian crops");
    return m;
}

}  // namespace

void ParadigmConfig::validate() const {
    if (tile < 8) throw ConfigError("paradigm tile must be at least 8 pixels");
    if (!(s_min >= 0.0 && s_min < s_max)) throw ConfigError("need 0 <= s_min < s_max");
    if (sigmas.empty() || sigmas.size() != sigma_weights.size())
        throw ConfigError("sigmas and sigma_weights must be nonempty and equal length");
    for (size_t i = 1; i < sigmas.size(); ++i)
        if (sigmas[i] <= sigmas[i - 1]) throw ConfigError("sigmas must be strictly increasing");
    if (p_min < 1 || d_max < 1 || n_m < 1 || p_smin < 1 || d_smax < 1)
        throw ConfigError("kd/mondrian parameters must be positive");
    if (dict_size < 1 || perlin_entries < 1 || mondrian_entries < 1)
        throw ConfigError("dictionary sizes must be positive");
    if (grid_lines_min < 1 || grid_lines_max < grid_lines_min)
        throw ConfigError("bad mondrian grid line range");
    if (mask_kmax < 0) throw ConfigError("mask_kmax must be >= 0");
}

uint64_t ParadigmConfig::config_hash() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "t%d kd%d,%d m%d,%d,%d,%d s%d,%d r%.17g,%.17g p%d k%d d%d",
                  tile, d_max, p_min, n_m, mondrian_entries, grid_lines_min, grid_lines_max,
                  d_smax, p_smin, s_min, s_max, perlin_entries, mask_kmax, dict_size);
    std::string repr(buf);
    for (size_t i = 0; i < sigmas.size(); ++i) {
        std::snprintf(buf, sizeof(buf), " %.17g:%.17g", sigmas[i], sigma_weights[i]);
        repr += buf;
    }
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : repr) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

ColorPool build_color_pool(const std::vector<Tensor>& images, int n_samples, Rng& rng) {
    if (images.empty()) throw ConfigError("color pool needs at least one image");
    if (n_samples < 1) throw ConfigError("color pool needs n_samples >= 1");
    ColorPool pool;
    pool.colors.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const Tensor& img = images[rng.uniform_int(images.size())];
        if (img.rank() != 3 || img.shape[0] != 3) throw ConfigError("color pool images must be (3,H,W)");
        const size_t plane = static_cast<size_t>(img.shape[1]) * img.shape[2];
        const size_t p = rng.uniform_int(plane);
        std::array<double, 3> c{img.data[p], img.data[plane + p], img.data[2 * plane + p]};
        const double intensity = std::max(kIntensityFloor, (c[0] + c[1] + c[2]) / 3.0);
        const double scale = 1.0 / std::sqrt(intensity);
        for (double& v : c) v *= scale;
        pool.colors.push_back(c);
    }
    return pool;
}

Tensor sample_albedo_kd(Rng& rng, const ColorPool& pool, const ParadigmConfig& cfg) {
    if (pool.colors.empty()) throw ConfigError("empty color pool");
    const std::vector<Rect> leaves = kd_leaves(rng, cfg.tile, cfg.d_max, cfg.p_min);
    Tensor out({3, cfg.tile, cfg.tile});
    const size_t plane = static_cast<size_t>(cfg.tile) * cfg.tile;
    for (const Rect& r : leaves) {
        const std::array<double, 3>& c = pool.colors[rng.uniform_int(pool.colors.size())];
        for (int ch = 0; ch < 3; ++ch)
            for (int y = r.y0; y < r.y1; ++y)
                std::fill(out.ptr() + ch * plane + static_cast<size_t>(y) * cfg.tile + r.x0,
                          out.ptr() + ch * plane + static_cast<size_t>(y) * cfg.tile + r.x1, c[ch]);
    }
    return out;
}

Tensor sample_albedo_mondrian(Rng& rng, const ColorPool& pool, const ParadigmConfig& cfg) {
    if (pool.colors.empty()) throw ConfigError("empty color pool");
    std::vector<RotatedMondrian> dict;
    dict.reserve(cfg.mondrian_entries);
    for (int i = 0; i < cfg.mondrian_entries; ++i)
        dict.push_back(build_rotated_mondrian(rng, &pool, cfg));

    const int nc = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.n_m)));
    std::vector<int> bounds(nc + 1);
    for (int i = 0; i <= nc; ++i) bounds[i] = static_cast<int>(std::lround(static_cast<double>(i) * cfg.tile / nc));

    Tensor out({3, cfg.tile, cfg.tile});
    const size_t plane = static_cast<size_t>(cfg.tile) * cfg.tile;
    for (int cy = 0; cy < nc; ++cy)
        for (int cx = 0; cx < nc; ++cx) {
            const int bh = bounds[cy + 1] - bounds[cy];
            const int bw = bounds[cx + 1] - bounds[cx];
            const RotatedMondrian& m = dict[rng.uniform_int(dict.size())];
            const int oy = m.box_y0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(m.box_side - bh + 1)));
            const int ox = m.box_x0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(m.box_side - bw + 1)));
            for (int y = 0; y < bh; ++y)
                for (int x = 0; x < bw; ++x) {
                    const int32_t label = m.labels[static_cast<size_t>(oy + y) * m.size + ox + x];
                    const std::array<double, 3>& c = m.cell_colors[static_cast<size_t>(label)];
                    for (int ch = 0; ch < 3; ++ch)
                        out.data[ch * plane + static_cast<size_t>(bounds[cy] + y) * cfg.tile + bounds[cx] + x] = c[ch];
                }
        }
    return out;
}

Tensor sample_albedo(Rng& rng, const ColorPool& pool, const ParadigmConfig& cfg, bool* used_kd) {
    const bool kd = rng.coin();
    if (used_kd) *used_kd = kd;
    return kd ? sample_albedo_kd(rng, pool, cfg) : sample_albedo_mondrian(rng, pool, cfg);
}

PerlinDicts build_perlin_dictionaries(Rng& rng, const ParadigmConfig& cfg, int entries_per_sigma) {
    if (entries_per_sigma < 1) throw ConfigError("need at least one entry per sigma");
    PerlinDicts dicts;
    dicts.entries.resize(cfg.sigmas.size());
    Tensor noise({1, cfg.tile, cfg.tile});
    Tensor smooth({1, cfg.tile, cfg.tile});
    for (size_t k = 0; k < cfg.sigmas.size(); ++k) {
        dicts.entries[k].reserve(entries_per_sigma);
        for (int e = 0; e < entries_per_sigma; ++e) {
            for (double& v : noise.data) v = rng.normal();
            kernels::gaussian_blur(cfg.tile, cfg.tile, noise.ptr(), smooth.ptr(), cfg.sigmas[k]);
            dicts.entries[k].push_back(smooth.cast<float>());
        }
    }
    return dicts;
}

Tensor sample_shading_component(Rng& rng, const PerlinDicts& dicts, const ParadigmConfig& cfg) {
    if (dicts.entries.size() != cfg.sigmas.size()) throw ConfigError("perlin dictionaries do not match config");
    Tensor out({1, cfg.tile, cfg.tile});
    for (size_t k = 0; k < dicts.entries.size(); ++k) {
        const Tensor32& e = dicts.entries[k][rng.uniform_int(dicts.entries[k].size())];
        const double w = cfg.sigma_weights[k];
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += w * e.data[i];
    }
    return out;
}

Tensor sample_shading(Rng& rng, const PerlinDicts& dicts, const ParadigmConfig& cfg) {
    Tensor field = sample_shading_component(rng, dicts, cfg);
    const int tile = cfg.tile;
    const int k = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.mask_kmax + 1)));
    for (int m = 0; m < k; ++m) {
        const Tensor repl = sample_shading_component(rng, dicts, cfg);
        if (rng.coin()) {
            // kd leaf mask
            const std::vector<Rect> leaves = kd_leaves(rng, tile, cfg.d_smax, cfg.p_smin);
            const Rect r = leaves[rng.uniform_int(leaves.size())];
            for (int y = r.y0; y < r.y1; ++y)
                for (int x = r.x0; x < r.x1; ++x)
                    field.data[static_cast<size_t>(y) * tile + x] = repl.data[static_cast<size_t>(y) * tile + x];
        } else {
            // rotated-mondrian cell mask
            const RotatedMondrian rm = build_rotated_mondrian(rng, nullptr, cfg);
            const int oy = rm.box_y0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(rm.box_side - tile + 1)));
            const int ox = rm.box_x0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(rm.box_side - tile + 1)));
            const int py = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(tile)));
            const int px = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(tile)));
            const int32_t cell = rm.labels[static_cast<size_t>(oy + py) * rm.size + ox + px];
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x)
                    if (rm.labels[static_cast<size_t>(oy + y) * rm.size + ox + x] == cell)
                        field.data[static_cast<size_t>(y) * tile + x] = repl.data[static_cast<size_t>(y) * tile + x];
        }
    }
    const double mn = field::min_value(field);
    const double mx = field::max_value(field);
    if (mx - mn < 1e-12) {
        for (double& v : field.data) v = 0.5 * (cfg.s_min + cfg.s_max);
        return field;
    }
    const double scale = (cfg.s_max - cfg.s_min) / (mx - mn);
    for (double& v : field.data) v = cfg.s_min + (v - mn) * scale;
    return field;
}

field::Color sample_color(Rng& rng) {
    field::Color c;
    for (double& v : c) v = std::clamp(0.5 + 0.5 * rng.normal(), kColorClampLo, kColorClampHi);
    return c;
}

ParadigmExample sample_example(Rng& rng, const ColorPool& pool, const PerlinDicts& dicts,
                               const ParadigmConfig& cfg) {
    ParadigmExample ex;
    ex.albedo = sample_albedo(rng, pool, cfg);
    ex.shading = sample_shading(rng, dicts, cfg);
    ex.color = sample_color(rng);
    ex.image = field::compose(ex.albedo, ex.shading, ex.color);
    return ex;
}

// ------------------------------------------------------- dictionaries --

const Tensor32& TileDictionary::draw(Rng& rng) const {
    if (tiles.empty()) throw ConfigError("empty tile dictionary");
    return tiles[rng.uniform_int(tiles.size())];
}

TileDictionary build_albedo_dictionary(uint64_t seed, const ColorPool& pool,
                                       const ParadigmConfig& cfg, int size) {
    cfg.validate();
    if (size < 1) throw ConfigError("dictionary size must be >= 1");
    TileDictionary d;
    d.kind = "albedo";
    d.tile = cfg.tile;
    d.seed = seed;
    d.config_hash = cfg.config_hash();
    d.tiles.resize(size);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < size; ++i) {
        Rng rng(seed, streams::sub(streams::kAlbedoDict, static_cast<uint64_t>(i)));
        d.tiles[i] = sample_albedo(rng, pool, cfg).cast<float>();
    }
    return d;
}

TileDictionary build_shading_dictionary(uint64_t seed, const ParadigmConfig& cfg, int size) {
    cfg.validate();
    if (size < 1) throw ConfigError("dictionary size must be >= 1");
    Rng perlin_rng(seed, streams::kPerlin);
    const PerlinDicts dicts = build_perlin_dictionaries(perlin_rng, cfg, cfg.perlin_entries);
    TileDictionary d;
    d.kind = "shading";
    d.tile = cfg.tile;
    d.seed = seed;
    d.config_hash = cfg.config_hash();
    d.tiles.resize(size);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < size; ++i) {
        Rng rng(seed, streams::sub(streams::kShadingDict, static_cast<uint64_t>(i)));
        d.tiles[i] = sample_shading(rng, dicts, cfg).cast<float>();
    }
    return d;
}

TileDictionary build_real_dictionary(uint64_t seed, const std::vector<Tensor>& images,
                                     const ParadigmConfig& cfg, int size) {
    cfg.validate();
    if (images.empty()) throw ConfigError("real dictionary needs at least one image");
    if (size < 1) throw ConfigError("dictionary size must be >= 1");
    TileDictionary d;
    d.kind = "real";
    d.tile = cfg.tile;
    d.seed = seed;
    d.config_hash = cfg.config_hash();
    d.tiles.resize(size);
    for (int i = 0; i < size; ++i) {
        Rng rng(seed, streams::sub(streams::kRealDict, static_cast<uint64_t>(i)));
        const Tensor* img = &images[rng.uniform_int(images.size())];
        Tensor scaled;
        if (img->shape[1] < cfg.tile || img->shape[2] < cfg.tile) {
            const double f = static_cast<double>(cfg.tile) /
                             std::min(img->shape[1], img->shape[2]);
            scaled = field::resize(*img, std::max(cfg.tile, static_cast<int>(std::ceil(img->shape[1] * f))),
                                   std::max(cfg.tile, static_cast<int>(std::ceil(img->shape[2] * f))));
            img = &scaled;
        }
        const int oy = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(img->shape[1] - cfg.tile + 1)));
        const int ox = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(img->shape[2] - cfg.tile + 1)));
        Tensor32 tileimg({3, cfg.tile, cfg.tile});
        const size_t src_plane = static_cast<size_t>(img->shape[1]) * img->shape[2];
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < cfg.tile; ++y)
                for (int x = 0; x < cfg.tile; ++x)
                    tileimg.data[(static_cast<size_t>(ch) * cfg.tile + y) * cfg.tile + x] =
                        static_cast<float>(img->data[ch * src_plane + static_cast<size_t>(oy + y) * img->shape[2] + ox + x]);
        d.tiles[i] = std::move(tileimg);
    }
    return d;
}

void save_dictionary(const std::string& dir, const TileDictionary& dict) {
    fs::create_directories(dir);
    json manifest = {
        {"format", "iik-tile-dictionary"},
        {"version", 1},
        {"kind", dict.kind},
        {"tile", dict.tile},
        {"seed", dict.seed},
        {"config_hash", dict.config_hash},
        {"count", dict.tiles.size()},
        {"rng", kRngName},
    };
    std::ofstream mf(dir + "/manifest.json");
    if (!mf) throw IoError("cannot write manifest in " + dir);
    mf << manifest.dump(2) << "\n";
    mf.close();
    char name[64];
    for (size_t i = 0; i < dict.tiles.size(); ++i) {
        std::snprintf(name, sizeof(name), "/tile_%05zu.iikf", i);
        io::write_iikf(dir + name, dict.tiles[i]);
    }
}

TileDictionary load_dictionary(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw IoError("missing dictionary manifest in " + dir);
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw IoError(dir + ": corrupt manifest: " + e.what());
    }
    if (manifest.value("format", "") != "iik-tile-dictionary")
        throw IoError(dir + ": not a tile dictionary");
    TileDictionary d;
    d.kind = manifest.value("kind", "");
    d.tile = manifest.value("tile", 0);
    d.seed = manifest.value("seed", uint64_t{0});
    d.config_hash = manifest.value("config_hash", uint64_t{0});
    const size_t count = manifest.value("count", size_t{0});
    if (count == 0) throw IoError(dir + ": dictionary manifest declares no tiles");
    d.tiles.reserve(count);
    char name[64];
    for (size_t i = 0; i < count; ++i) {
        std::snprintf(name, sizeof(name), "/tile_%05zu.iikf", i);
        Tensor32 t = io::read_iikf32(dir + name);
        if (t.shape[1] != d.tile || t.shape[2] != d.tile)
            throw IoError(dir + ": tile size does not match manifest");
        d.tiles.push_back(std::move(t));
    }
    return d;
}

TileDictionary ingest_tile_dictionary(const std::string& dir, int expected_tile) {
    if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".iikf" || ext == ".png") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError(dir + ": no .iikf or .png tiles to ingest");
    TileDictionary d;
    d.kind = "ingested";
    d.tile = expected_tile;
    for (const std::string& f : files) {
        Tensor32 t = io::read_field(f).cast<float>();
        if (t.shape[1] != expected_tile || t.shape[2] != expected_tile)
            throw IoError(f + ": wrong tile size for ingest");
        d.tiles.push_back(std::move(t));
    }
    return d;
}

}  // namespace iik::paradigm
