#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iik/checkpoint.hpp"
#include "iik/common.hpp"
#include "iik/decomposer.hpp"
#include "iik/decomposition.hpp"
#include "iik/field.hpp"
#include "iik/image_io.hpp"
#include "iik/inference.hpp"
#include "iik/paradigm.hpp"
#include "iik/presets.hpp"
#include "iik/rng.hpp"
#include "iik/selftest.hpp"
#include "iik/training.hpp"
#include "iik/whdr.hpp"

namespace fs = std::filesystem;
using namespace iik;
using nlohmann::json;

namespace {

// ------------------------------------------------------------ plumbing --

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// sorted for deterministic traversal
std::vector<fs::path> list_files(const fs::path& dir, const std::vector<std::string>& exts) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Tensor> load_images(const std::vector<fs::path>& paths) {
    std::vector<Tensor> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(io::read_field(p.string()));
    return out;
}

Tensor resize_short_edge(const Tensor& img, int short_edge) {
    const int h = img.shape[1], w = img.shape[2];
    if (short_edge <= 0 || std::min(h, w) == short_edge) return img;
    const double scale = static_cast<double>(short_edge) / std::min(h, w);
    return field::resize(img, std::max(1, static_cast<int>(std::lround(h * scale))),
                         std::max(1, static_cast<int>(std::lround(w * scale))));
}

// Color pools come from real images; without any, fall back to a seeded
// noise image so dictionary building stays self-contained.
paradigm::ColorPool make_color_pool(const std::vector<Tensor>& images, uint64_t seed) {
    Rng rng(seed, streams::kColorPool);
    if (!images.empty()) return paradigm::build_color_pool(images, 4096, rng);
    Tensor noise({3, 256, 256});
    for (auto& v : noise.data) v = rng.uniform(0.05, 1.0);
    return paradigm::build_color_pool({noise}, 4096, rng);
}

json run_header(const std::string& command, const presets::Experiment& exp, uint64_t seed) {
    return {{"command", command}, {"experiment", exp.to_json()}, {"seed", seed}};
}

// ------------------------------------------------------------ paradigm --

struct ParadigmArgs {
    std::string experiment = "base";
    std::string out;
    std::string images_dir;
    uint64_t seed = 0;
    int count = 16;
    int dict_size = 0;  // 0 = preset value
    int tile = 0;
    int short_edge = -1;  // -1 = preset value
    std::string kind = "real";
};

presets::Experiment resolve_paradigm(const ParadigmArgs& a) {
    presets::Experiment exp = presets::experiment_preset(a.experiment);
    if (a.dict_size > 0) exp.paradigm.dict_size = a.dict_size;
    if (a.tile > 0) {
        exp.paradigm.tile = a.tile;
        exp.decomposer.tile = a.tile;
    }
    if (a.short_edge >= 0) exp.ingest_short_edge = a.short_edge;
    exp.training.seed = a.seed;
    exp.validate();
    return exp;
}

void cmd_paradigm_sample(const ParadigmArgs& a) {
    const auto exp = resolve_paradigm(a);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Tensor> images;
    if (!a.images_dir.empty()) images = load_images(list_files(a.images_dir, {".png", ".iikf", ".iikd"}));
    const auto pool = make_color_pool(images, a.seed);
    Rng prng(a.seed, streams::kPerlin);
    const auto perlin = paradigm::build_perlin_dictionaries(prng, exp.paradigm, exp.paradigm.perlin_entries);

    fs::create_directories(a.out);
    Rng rng(a.seed, streams::kAlbedoDict);
    for (int i = 0; i < a.count; ++i) {
        const auto ex = paradigm::sample_example(rng, pool, perlin, exp.paradigm);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "sample_%04d", i);
        const fs::path base = fs::path(a.out) / stem;
        io::write_png(base.string() + ".image.png", ex.image);
        io::write_png(base.string() + ".albedo.png", ex.albedo);
        io::write_png(base.string() + ".shading.png", ex.shading);
        io::write_iikf(base.string() + ".image.iikf", ex.image);
    }
    json manifest = run_header("paradigm sample", exp, a.seed);
    manifest["count"] = a.count;
    manifest["seconds"] = seconds_since(t0);
    write_json_file(fs::path(a.out) / "manifest.json", manifest);
}

void cmd_paradigm_dict(const ParadigmArgs& a) {
    const auto exp = resolve_paradigm(a);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Tensor> images;
    if (!a.images_dir.empty()) images = load_images(list_files(a.images_dir, {".png", ".iikf", ".iikd"}));
    const auto pool = make_color_pool(images, a.seed);

    fs::create_directories(a.out);
    const int size = exp.paradigm.dict_size;
    const auto albedo = paradigm::build_albedo_dictionary(a.seed, pool, exp.paradigm, size);
    paradigm::save_dictionary((fs::path(a.out) / "albedo").string(), albedo);
    const auto shading = paradigm::build_shading_dictionary(a.seed, exp.paradigm, size);
    paradigm::save_dictionary((fs::path(a.out) / "shading").string(), shading);
    bool wrote_real = false;
    if (!images.empty()) {
        for (auto& img : images) img = resize_short_edge(img, exp.ingest_short_edge);
        const auto real = paradigm::build_real_dictionary(a.seed, images, exp.paradigm, size);
        paradigm::save_dictionary((fs::path(a.out) / "real").string(), real);
        wrote_real = true;
    }
    json manifest = run_header("paradigm dict", exp, a.seed);
    manifest["size"] = size;
    manifest["real"] = wrote_real;
    manifest["seconds"] = seconds_since(t0);
    write_json_file(fs::path(a.out) / "manifest.json", manifest);
}

void cmd_paradigm_preview(const ParadigmArgs& a) {
    const auto exp = resolve_paradigm(a);
    std::vector<Tensor> images;
    if (!a.images_dir.empty()) images = load_images(list_files(a.images_dir, {".png", ".iikf", ".iikd"}));
    const auto pool = make_color_pool(images, a.seed);
    Rng prng(a.seed, streams::kPerlin);
    const auto perlin = paradigm::build_perlin_dictionaries(prng, exp.paradigm, exp.paradigm.perlin_entries);

    // 4x4 grid of composed samples
    const int t = exp.paradigm.tile, grid = 4;
    Tensor sheet({3, grid * t, grid * t});
    Rng rng(a.seed, streams::kAlbedoDict);
    const size_t plane = static_cast<size_t>(grid * t) * (grid * t);
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            const auto ex = paradigm::sample_example(rng, pool, perlin, exp.paradigm);
            const size_t tp = static_cast<size_t>(t) * t;
            for (int ch = 0; ch < 3; ++ch)
                for (int y = 0; y < t; ++y)
                    std::copy(ex.image.data.begin() + ch * tp + static_cast<size_t>(y) * t,
                              ex.image.data.begin() + ch * tp + static_cast<size_t>(y) * t + t,
                              sheet.data.begin() + ch * plane +
                                  static_cast<size_t>(gy * t + y) * (grid * t) + gx * t);
        }
    if (const fs::path dir = fs::path(a.out).parent_path(); !dir.empty()) fs::create_directories(dir);
    io::write_png(a.out, sheet);
}

void cmd_paradigm_ingest(const ParadigmArgs& a) {
    const auto exp = resolve_paradigm(a);
    const auto t0 = std::chrono::steady_clock::now();
    auto images = load_images(list_files(a.images_dir, {".png", ".iikf", ".iikd"}));
    if (images.empty()) throw ConfigError("no images found in " + a.images_dir);
    for (auto& img : images) img = resize_short_edge(img, exp.ingest_short_edge);
    auto dict = paradigm::build_real_dictionary(a.seed, images, exp.paradigm, exp.paradigm.dict_size);
    dict.kind = a.kind;
    paradigm::save_dictionary(a.out, dict);
    json manifest = run_header("paradigm ingest", exp, a.seed);
    manifest["images"] = static_cast<int>(images.size());
    manifest["kind"] = a.kind;
    manifest["seconds"] = seconds_since(t0);
    write_json_file(fs::path(a.out) / "ingest.json", manifest);
}

// --------------------------------------------------------------- train --

struct TrainArgs {
    std::string experiment = "base";
    std::string dicts;
    std::string out;
    std::string resume;
    long images = 0;  // 0 = preset value
    int batch = 0;
    int micro_batch = 0;
    uint64_t seed = 0;
    std::string precision;
    bool paradigm_only = false;
};

template <typename T>
void run_train(const presets::Experiment& exp, const TrainArgs& a, const paradigm::TileDictionary& albedo,
               const paradigm::TileDictionary& shading, const paradigm::TileDictionary* real) {
    const auto t0 = std::chrono::steady_clock::now();
    train::TrainState<T> st;
    if (a.resume.empty()) {
        st = train::init_state<T>(exp.training, exp.weights, exp.decomposer, exp.critic);
    } else {
        if (ckpt::precision(a.resume) != exp.training.precision)
            throw ConfigError("resume checkpoint precision differs from the requested precision");
        if constexpr (std::is_same_v<T, float>)
            st = train::load_state_from(ckpt::load_f32(a.resume));
        else
            st = train::load_state_from(ckpt::load_f64(a.resume));
        st.cfg.total_images = exp.training.total_images;
    }

    train::TrainData data;
    data.albedo = &albedo;
    data.shading = &shading;
    data.real = real;

    fs::create_directories(fs::path(a.out) / "checkpoints");
    std::ofstream log(fs::path(a.out) / "log.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot write the training log under " + a.out);
    train::run_training(st, data, &log, (fs::path(a.out) / "checkpoints").string());
    train::save_state((fs::path(a.out) / "final").string(), st);

    const auto held = train::eval_paradigm(st.model, albedo, shading, 64, st.cfg.seed + 1);
    json run = run_header("train", exp, st.cfg.seed);
    run["images_seen"] = st.images_seen;
    run["steps"] = st.step;
    run["seconds"] = seconds_since(t0);
    run["heldout"] = {{"l_a", held.l_a}, {"l_s", held.l_s}, {"residual_abs", held.residual_abs}};
    write_json_file(fs::path(a.out) / "run.json", run);
}

void cmd_train(const TrainArgs& a) {
    presets::Experiment exp = presets::experiment_preset(a.experiment);
    if (a.images > 0) exp.training.total_images = a.images;
    if (a.batch > 0) exp.training.batch = a.batch;
    if (a.micro_batch > 0) exp.training.micro_batch = a.micro_batch;
    if (!a.precision.empty()) exp.training.precision = a.precision;
    if (a.paradigm_only) exp.training.mix = train::Mix::kParadigmOnly;
    exp.training.seed = a.seed;

    const auto albedo = paradigm::load_dictionary((fs::path(a.dicts) / "albedo").string());
    const auto shading = paradigm::load_dictionary((fs::path(a.dicts) / "shading").string());
    if (albedo.tile != exp.paradigm.tile) {
        // follow the dictionaries: they fix the tile the model must consume
        exp.paradigm.tile = albedo.tile;
        exp.decomposer.tile = albedo.tile;
    }
    exp.validate();

    paradigm::TileDictionary real;
    const paradigm::TileDictionary* real_ptr = nullptr;
    if (exp.training.mix == train::Mix::kAlternating) {
        if (!fs::is_directory(fs::path(a.dicts) / "real"))
            throw ConfigError("alternating training needs a real dictionary; pass --paradigm-only to skip it");
        real = paradigm::load_dictionary((fs::path(a.dicts) / "real").string());
        real_ptr = &real;
    }

    if (exp.training.precision == "f32")
        run_train<float>(exp, a, albedo, shading, real_ptr);
    else
        run_train<double>(exp, a, albedo, shading, real_ptr);
}

// ----------------------------------------------------------- decompose --

struct DecomposeArgs {
    std::string checkpoint;
    std::string out;
    std::string preset = "bbaf";
    std::vector<std::string> images;
    uint64_t seed = 0;
    int n_tiles = 0;
    int n_scales = 0;
    bool no_ema = false;
};

template <typename T>
Decomposition decompose_one(const ckpt::Archive<T>& archive, const Tensor& image,
                            const infer::AveragingConfig& cfg, bool use_ema) {
    const auto arch = dec::DecomposerConfig::from_json(archive.meta.at("arch"));
    if (arch.location_code != cfg.use_location_code)
        throw ConfigError("averaging preset and checkpoint disagree on the location code");
    const auto params = dec::from_archive(archive, use_ema ? "ema." : "model.", arch);
    const infer::NetworkModel<T> model(params);
    return infer::decompose_image(model, image, cfg);
}

void cmd_decompose(const DecomposeArgs& a) {
    if (a.images.empty()) throw ConfigError("no input images given");
    infer::AveragingConfig cfg = infer::averaging_preset(a.preset);
    if (a.n_tiles > 0) cfg.n_tiles = a.n_tiles;
    if (a.n_scales > 0) cfg.n_scales = a.n_scales;
    cfg.seed = a.seed;
    cfg.validate();

    const std::string prec = ckpt::precision(a.checkpoint);
    ckpt::Archive<float> a32;
    ckpt::Archive<double> a64;
    if (prec == "f32")
        a32 = ckpt::load_f32(a.checkpoint);
    else
        a64 = ckpt::load_f64(a.checkpoint);

    fs::create_directories(a.out);
    for (const auto& path : a.images) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor image = io::read_field(path);
        const Decomposition d = prec == "f32" ? decompose_one(a32, image, cfg, !a.no_ema)
                                              : decompose_one(a64, image, cfg, !a.no_ema);
        const std::string stem = fs::path(path).stem().string();
        const fs::path base = fs::path(a.out) / stem;
        io::write_iikf(base.string() + ".albedo.iikf", d.albedo);
        io::write_iikf(base.string() + ".shading.iikf", d.shading);
        io::write_iikf(base.string() + ".color.iikf", d.color);
        io::write_iikf(base.string() + ".residual.iikf", d.residual);
        io::write_png(base.string() + ".albedo.png", d.albedo);
        io::write_png(base.string() + ".shading.png", d.shading);
        json sidecar = {{"command", "decompose"},
                        {"input", path},
                        {"checkpoint", a.checkpoint},
                        {"precision", prec},
                        {"ema", !a.no_ema},
                        {"averaging", cfg.to_json()},
                        {"seed", a.seed},
                        {"seconds", seconds_since(t0)}};
        write_json_file(base.string() + ".json", sidecar);
    }
}

// ---------------------------------------------------------------- eval --

struct EvalArgs {
    std::string decomp;
    std::string judgements;
    std::string out;
    std::string mode = "linear";
    std::string report_a, report_b;
    std::string checkpoint;
    std::string preset = "bbaf";
    std::vector<std::string> images;
    std::string plot;
    double p = 0.2;
    int n_sets = 50;
    int repeats = 4;
    uint64_t seed = 0;
};

struct EvalImage {
    std::string stem;
    whdr::JudgementSet js;
    std::map<int, double> table;
};

std::vector<EvalImage> load_eval_images(const EvalArgs& a) {
    std::vector<EvalImage> out;
    for (const auto& jp : list_files(a.judgements, {".json"})) {
        const fs::path albedo_path = fs::path(a.decomp) / (jp.stem().string() + ".albedo.iikf");
        if (!fs::exists(albedo_path))
            throw IoError("no decomposition " + albedo_path.string() + " for " + jp.string());
        EvalImage ev;
        ev.stem = jp.stem().string();
        ev.js = whdr::load_judgements(jp.string());
        ev.table = whdr::lightness_table(io::read_field(albedo_path.string()), ev.js);
        out.push_back(std::move(ev));
    }
    if (out.empty()) throw ConfigError("no judgement files found in " + a.judgements);
    return out;
}

// single instance pooling several images: point ids are offset per image
void merge_into(const EvalImage& ev, int64_t& offset, whdr::JudgementSet& js,
                std::map<int, double>& table) {
    int64_t max_id = 0;
    for (const auto& p : ev.js.points) {
        max_id = std::max<int64_t>(max_id, p.id);
        js.points.push_back({static_cast<int>(p.id + offset), p.x, p.y});
        table[static_cast<int>(p.id + offset)] = ev.table.at(p.id);
    }
    for (const auto& c : ev.js.comparisons)
        js.comparisons.push_back({static_cast<int>(c.point1 + offset),
                                  static_cast<int>(c.point2 + offset), c.darker, c.weight});
    offset += max_id + 1;
}

double pooled_oracle_tau(const std::vector<const EvalImage*>& split, whdr::DiffMode mode) {
    whdr::JudgementSet js;
    std::map<int, double> table;
    int64_t offset = 0;
    for (const auto* ev : split) merge_into(*ev, offset, js, table);
    return whdr::oracle_threshold(js, table, mode).tau;
}

void cmd_eval_whdr(const EvalArgs& a) {
    const whdr::DiffMode mode = whdr::diff_mode_from_name(a.mode);
    const auto images = load_eval_images(a);

    // held-out thresholds: pick on one half, score the other
    std::vector<const EvalImage*> split_a, split_b;
    for (size_t i = 0; i < images.size(); ++i)
        (i % 2 == 0 ? split_a : split_b).push_back(&images[i]);
    const double tau_a = pooled_oracle_tau(split_a, mode);
    const double tau_b = split_b.empty() ? tau_a : pooled_oracle_tau(split_b, mode);

    json rows = json::array();
    double m010 = 0, m0165 = 0, moracle = 0, mheld = 0;
    for (size_t i = 0; i < images.size(); ++i) {
        const auto& ev = images[i];
        const double w010 = whdr::whdr(ev.js, ev.table, {mode, whdr::kTauDefault});
        const double w0165 = whdr::whdr(ev.js, ev.table, {mode, whdr::kTauAlternative});
        const auto oracle = whdr::oracle_threshold(ev.js, ev.table, mode);
        const double theld = i % 2 == 0 ? tau_b : tau_a;  // threshold from the other split
        const double wheld = whdr::whdr(ev.js, ev.table, {mode, theld});
        rows.push_back({{"name", ev.stem},
                        {"whdr_010", w010},
                        {"whdr_0165", w0165},
                        {"whdr_oracle", oracle.whdr},
                        {"tau_oracle", oracle.tau},
                        {"whdr_heldout", wheld}});
        m010 += w010;
        m0165 += w0165;
        moracle += oracle.whdr;
        mheld += wheld;
    }
    const double n = static_cast<double>(images.size());
    json report = {{"command", "eval whdr"},
                   {"mode", a.mode},
                   {"images", rows},
                   {"heldout_taus", {{"even_images", tau_a}, {"odd_images", tau_b}}},
                   {"mean", {{"whdr_010", m010 / n},
                             {"whdr_0165", m0165 / n},
                             {"whdr_oracle", moracle / n},
                             {"whdr_heldout", mheld / n}}}};
    write_json_file(a.out, report);
    std::cout << "whdr mean @0.1 " << m010 / n << "  @0.165 " << m0165 / n << "  oracle "
              << moracle / n << "  heldout " << mheld / n << "\n";
}

// minimal box-and-whisker rendering so reports need no external plotting
void render_boxplot(const std::string& path, const whdr::BoxplotStats& st, double lo, double hi) {
    const int h = 120, w = 360;
    Tensor img({1, h, w}, 1.0);
    if (hi <= lo) hi = lo + 1e-6;
    const auto px = [&](double v) {
        const double t = (v - lo) / (hi - lo);
        return std::clamp(static_cast<int>(std::lround(10 + t * (w - 21))), 0, w - 1);
    };
    const auto vline = [&](int x, int y0, int y1) {
        for (int y = y0; y <= y1; ++y) img.data[static_cast<size_t>(y) * w + x] = 0.0;
    };
    const auto hline = [&](int y, int x0, int x1) {
        for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x)
            img.data[static_cast<size_t>(y) * w + x] = 0.0;
    };
    const int mid = h / 2, half = 25;
    hline(mid, px(st.whisker_lo), px(st.q25));
    hline(mid, px(st.q75), px(st.whisker_hi));
    vline(px(st.whisker_lo), mid - 10, mid + 10);
    vline(px(st.whisker_hi), mid - 10, mid + 10);
    vline(px(st.q25), mid - half, mid + half);
    vline(px(st.q75), mid - half, mid + half);
    hline(mid - half, px(st.q25), px(st.q75));
    hline(mid + half, px(st.q25), px(st.q75));
    vline(px(st.median), mid - half, mid + half);
    for (double o : st.outliers) vline(px(o), mid - 3, mid + 3);
    io::write_png(path, img);
}

void cmd_eval_bootstrap(const EvalArgs& a) {
    const auto eval_images = load_eval_images(a);
    std::vector<whdr::ImageEval> pool;
    std::vector<int> ids;
    for (size_t i = 0; i < eval_images.size(); ++i) {
        whdr::ImageEval ev;
        ev.judgements = eval_images[i].js;
        ev.lightness = eval_images[i].table;
        pool.push_back(std::move(ev));
        ids.push_back(static_cast<int>(i));
    }
    Rng rng(a.seed, streams::kEval);
    const auto sets = whdr::simulated_test_sets(ids, a.p, a.n_sets, rng);
    const auto boot = whdr::bootstrap_whdr(pool, sets, {whdr::DiffMode::kLinear, whdr::kTauDefault});

    json report = {{"command", "eval bootstrap"},
                   {"p", a.p},
                   {"n_sets", a.n_sets},
                   {"seed", a.seed},
                   {"whdrs", boot.whdrs},
                   {"stats", boot.stats.to_json()}};
    write_json_file(a.out, report);
    if (!a.plot.empty()) {
        const auto [lo, hi] = std::minmax_element(boot.whdrs.begin(), boot.whdrs.end());
        render_boxplot(a.plot, boot.stats, *lo, *hi);
    }
    std::cout << "bootstrap median " << boot.stats.median << "  iqr "
              << boot.stats.q75 - boot.stats.q25 << "  notch " << boot.stats.notch << "\n";
}

void cmd_eval_treat(const EvalArgs& a) {
    const json ja = read_json_file(a.report_a);
    const json jb = read_json_file(a.report_b);
    if (!ja.contains("whdrs") || !jb.contains("whdrs"))
        throw ConfigError("treat expects two bootstrap reports with per-set whdrs");
    const auto wa = ja["whdrs"].get<std::vector<double>>();
    const auto wb = jb["whdrs"].get<std::vector<double>>();
    const auto tr = whdr::treatment_effect(wa, wb);
    json report = {{"command", "eval treat"},
                   {"report_a", a.report_a},
                   {"report_b", a.report_b},
                   {"differences", tr.differences},
                   {"stats", tr.stats.to_json()}};
    write_json_file(a.out, report);
    if (!a.plot.empty()) {
        const auto [lo, hi] = std::minmax_element(tr.differences.begin(), tr.differences.end());
        render_boxplot(a.plot, tr.stats, *lo, *hi);
    }
    std::cout << "treatment median " << tr.stats.median << "  notch " << tr.stats.notch << "\n";
}

void cmd_eval_offsetvar(const EvalArgs& a) {
    if (a.images.empty()) throw ConfigError("offsetvar needs input images");
    infer::AveragingConfig cfg = infer::averaging_preset(a.preset);
    cfg.seed = a.seed;

    std::vector<Tensor> images;
    std::vector<whdr::JudgementSet> judgements;
    for (const auto& path : a.images) {
        const fs::path jp = fs::path(a.judgements) / (fs::path(path).stem().string() + ".json");
        judgements.push_back(whdr::load_judgements(jp.string()));
        images.push_back(io::read_field(path));
    }

    const std::string prec = ckpt::precision(a.checkpoint);
    std::vector<double> whdrs;
    double stddev = 0.0;
    const whdr::PredictionRule rule{whdr::DiffMode::kLinear, whdr::kTauDefault};
    if (prec == "f32") {
        const auto archive = ckpt::load_f32(a.checkpoint);
        const auto arch = dec::DecomposerConfig::from_json(archive.meta.at("arch"));
        const infer::NetworkModel<float> model(dec::from_archive(archive, "ema.", arch));
        stddev = whdr::averaging_variance(model, cfg, images, judgements, rule, a.repeats, &whdrs);
    } else {
        const auto archive = ckpt::load_f64(a.checkpoint);
        const auto arch = dec::DecomposerConfig::from_json(archive.meta.at("arch"));
        const infer::NetworkModel<double> model(dec::from_archive(archive, "ema.", arch));
        stddev = whdr::averaging_variance(model, cfg, images, judgements, rule, a.repeats, &whdrs);
    }
    json report = {{"command", "eval offsetvar"},
                   {"checkpoint", a.checkpoint},
                   {"averaging", cfg.to_json()},
                   {"repeats", a.repeats},
                   {"seed", a.seed},
                   {"whdrs", whdrs},
                   {"stddev", stddev}};
    write_json_file(a.out, report);
    std::cout << "offset-variance stddev " << stddev << " over " << a.repeats << " repeats\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised intrinsic image decomposition toolkit"};
    app.require_subcommand(1);

    // paradigm
    auto* par = app.add_subcommand("paradigm", "procedural training data");
    par->require_subcommand(1);
    ParadigmArgs pa;
    auto add_paradigm_common = [&](CLI::App* c) {
        c->add_option("--experiment", pa.experiment, "experiment preset key");
        c->add_option("--seed", pa.seed, "rng seed");
        c->add_option("--tile", pa.tile, "tile size override");
        c->add_option("--images", pa.images_dir, "directory of real images");
    };
    auto* p_sample = par->add_subcommand("sample", "write individual paradigm samples");
    add_paradigm_common(p_sample);
    p_sample->add_option("--out", pa.out, "output directory")->required();
    p_sample->add_option("--count", pa.count, "number of samples");
    auto* p_dict = par->add_subcommand("dict", "build tile dictionaries");
    add_paradigm_common(p_dict);
    p_dict->add_option("--out", pa.out, "output directory")->required();
    p_dict->add_option("--size", pa.dict_size, "dictionary size override");
    auto* p_prev = par->add_subcommand("preview", "4x4 grid png of samples");
    add_paradigm_common(p_prev);
    p_prev->add_option("--out", pa.out, "output png")->required();
    auto* p_ing = par->add_subcommand("ingest", "cut a tile dictionary from images");
    add_paradigm_common(p_ing);
    p_ing->add_option("--out", pa.out, "output directory")->required();
    p_ing->add_option("--size", pa.dict_size, "dictionary size override");
    p_ing->add_option("--short-edge", pa.short_edge, "resize images to this short edge first");
    p_ing->add_option("--kind", pa.kind, "dictionary kind label");

    // train
    auto* tr = app.add_subcommand("train", "train a decomposer");
    TrainArgs ta;
    tr->add_option("--experiment", ta.experiment, "experiment preset key");
    tr->add_option("--dicts", ta.dicts, "dictionary directory (albedo/, shading/, real/)")->required();
    tr->add_option("--out", ta.out, "run directory")->required();
    tr->add_option("--images", ta.images, "total training images");
    tr->add_option("--batch", ta.batch, "batch size");
    tr->add_option("--micro-batch", ta.micro_batch, "micro batch size");
    tr->add_option("--seed", ta.seed, "rng seed");
    tr->add_option("--precision", ta.precision, "f32 or f64");
    tr->add_option("--resume", ta.resume, "checkpoint directory to resume from");
    tr->add_flag("--paradigm-only", ta.paradigm_only, "skip real steps (alpha_d moot)");

    // decompose
    auto* de = app.add_subcommand("decompose", "decompose images with a checkpoint");
    DecomposeArgs da;
    de->add_option("--checkpoint", da.checkpoint, "training state directory")->required();
    de->add_option("--out", da.out, "output directory")->required();
    de->add_option("--preset", da.preset, "averaging preset (base/bba/np/bbap/bbaf/bbat)");
    de->add_option("--seed", da.seed, "layout seed");
    de->add_option("--tiles", da.n_tiles, "tiles per axis override");
    de->add_option("--scales", da.n_scales, "scale count override");
    de->add_flag("--no-ema", da.no_ema, "use the live parameters instead of the shadow");
    de->add_option("images", da.images, "input images (png/iikf)")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "evaluation reports");
    ev->require_subcommand(1);
    EvalArgs ea;
    auto* e_whdr = ev->add_subcommand("whdr", "per-image whdr at fixed/oracle/held-out thresholds");
    e_whdr->add_option("--decomp", ea.decomp, "decomposition directory")->required();
    e_whdr->add_option("--judgements", ea.judgements, "judgement json directory")->required();
    e_whdr->add_option("--out", ea.out, "report json")->required();
    e_whdr->add_option("--mode", ea.mode, "linear or log");
    auto* e_boot = ev->add_subcommand("bootstrap", "simulated test-set whdr spread");
    e_boot->add_option("--decomp", ea.decomp, "decomposition directory")->required();
    e_boot->add_option("--judgements", ea.judgements, "judgement json directory")->required();
    e_boot->add_option("--out", ea.out, "report json")->required();
    e_boot->add_option("--p", ea.p, "inclusion probability");
    e_boot->add_option("--sets", ea.n_sets, "number of simulated sets");
    e_boot->add_option("--seed", ea.seed, "rng seed");
    e_boot->add_option("--plot", ea.plot, "optional boxplot png");
    auto* e_treat = ev->add_subcommand("treat", "difference between two bootstrap reports");
    e_treat->add_option("--a", ea.report_a, "bootstrap report A")->required();
    e_treat->add_option("--b", ea.report_b, "bootstrap report B")->required();
    e_treat->add_option("--out", ea.out, "report json")->required();
    e_treat->add_option("--plot", ea.plot, "optional boxplot png");
    auto* e_off = ev->add_subcommand("offsetvar", "whdr spread over tiling offsets");
    e_off->add_option("--checkpoint", ea.checkpoint, "training state directory")->required();
    e_off->add_option("--judgements", ea.judgements, "judgement json directory")->required();
    e_off->add_option("--out", ea.out, "report json")->required();
    e_off->add_option("--preset", ea.preset, "averaging preset");
    e_off->add_option("--repeats", ea.repeats, "independent repeats");
    e_off->add_option("--seed", ea.seed, "base seed");
    e_off->add_option("images", ea.images, "input images")->required();

    // selftest
    auto* self = app.add_subcommand("selftest", "run the built-in invariant checks");
    bool quick = false;
    self->add_flag("--quick", quick, "skip the gradient checks");

    try {
        app.parse(argc, argv);
        if (p_sample->parsed()) cmd_paradigm_sample(pa);
        if (p_dict->parsed()) cmd_paradigm_dict(pa);
        if (p_prev->parsed()) cmd_paradigm_preview(pa);
        if (p_ing->parsed()) cmd_paradigm_ingest(pa);
        if (tr->parsed()) cmd_train(ta);
        if (de->parsed()) cmd_decompose(da);
        if (e_whdr->parsed()) cmd_eval_whdr(ea);
        if (e_boot->parsed()) cmd_eval_bootstrap(ea);
        if (e_treat->parsed()) cmd_eval_treat(ea);
        if (e_off->parsed()) cmd_eval_offsetvar(ea);
        if (self->parsed()) {
            const auto results = selftest::run(quick);
            if (selftest::report(std::cout, results) > 0) return 1;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::config);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::io);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::numeric);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
