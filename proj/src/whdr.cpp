#include "iik/whdr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace iik::whdr {

namespace {

constexpr double kLogFloor = 1e-4;

char darker_from_string(const std::string& s) {
    if (s == "1") return '1';
    if (s == "2") return '2';
    if (s == "E") return 'E';
    throw ConfigError("judgement darker label must be \"1\", \"2\" or \"E\"");
}

double quantile(const std::vector<double>& sorted, double p) {
    const size_t n = sorted.size();
    const double h = p * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(h);
    const size_t hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// weighted disagreement of precomputed signed differences at a threshold
double whdr_at(const std::vector<double>& diff, const std::vector<char>& label,
               const std::vector<double>& weight, double tau) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < diff.size(); ++i) {
        const char pred = std::abs(diff[i]) <= tau ? 'E' : (diff[i] > 0.0 ? '2' : '1');
        if (pred != label[i]) num += weight[i];
        den += weight[i];
    }
    if (!(den > 0.0)) throw ConfigError("whdr: zero total judgement weight");
    return num / den;
}

}  // namespace

void JudgementSet::validate() const {
    std::set<int> ids;
    for (const Point& p : points) {
        if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
            throw ConfigError("judgement point coordinates must be in [0,1]");
        ids.insert(p.id);
    }
    for (const Comparison& c : comparisons) {
        if (!ids.count(c.point1) || !ids.count(c.point2))
            throw ConfigError("judgement comparison references a missing point id");
        if (c.darker != '1' && c.darker != '2' && c.darker != 'E')
            throw ConfigError("judgement darker label must be '1', '2' or 'E'");
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
            throw ConfigError("judgement weight must be finite and >= 0");
    }
}

nlohmann::json JudgementSet::to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const Point& p : points) pts.push_back({{"id", p.id}, {"x", p.x}, {"y", p.y}});
    nlohmann::json cmps = nlohmann::json::array();
    for (const Comparison& c : comparisons)
        cmps.push_back({{"point1", c.point1},
                        {"point2", c.point2},
                        {"darker", std::string(1, c.darker)},
                        {"darker_score", c.weight}});
    return {{"points", pts}, {"intrinsic_comparisons", cmps}};
}

JudgementSet JudgementSet::from_json(const nlohmann::json& j) {
    JudgementSet js;
    for (const auto& p : j.at("points"))
        js.points.push_back({p.at("id").get<int>(), p.at("x").get<double>(), p.at("y").get<double>()});
    for (const auto& c : j.at("intrinsic_comparisons"))
        js.comparisons.push_back({c.at("point1").get<int>(), c.at("point2").get<int>(),
                                  darker_from_string(c.at("darker").get<std::string>()),
                                  c.at("darker_score").get<double>()});
    js.validate();
    return js;
}

JudgementSet load_judgements(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open judgement file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse judgement file " + path + ": " + e.what());
    }
    try {
        return JudgementSet::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed judgement file " + path + ": " + e.what());
    }
}

void save_judgements(const std::string& path, const JudgementSet& js) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write judgement file: " + path);
    out << js.to_json().dump(2) << "\n";
    if (!out) throw IoError("failed writing judgement file: " + path);
}

std::string diff_mode_name(DiffMode m) { return m == DiffMode::kLinear ? "linear" : "log"; }

DiffMode diff_mode_from_name(const std::string& name) {
    if (name == "linear") return DiffMode::kLinear;
    if (name == "log") return DiffMode::kLog;
    throw ConfigError("unknown difference mode: " + name);
}

void PredictionRule::validate() const {
    if (!(threshold > 0.0) || !std::isfinite(threshold)) throw ConfigError("threshold must be > 0");
}

nlohmann::json PredictionRule::to_json() const {
    return {{"mode", diff_mode_name(mode)}, {"threshold", threshold}};
}

PredictionRule PredictionRule::from_json(const nlohmann::json& j) {
    PredictionRule r;
    if (j.contains("mode")) r.mode = diff_mode_from_name(j.at("mode").get<std::string>());
    r.threshold = j.value("threshold", r.threshold);
    r.validate();
    return r;
}

double lightness(const Tensor& albedo, double x, double y) {
    if (albedo.rank() != 3 || albedo.shape[0] != 3) throw ConfigError("lightness: albedo must be (3,H,W)");
    const int h = albedo.shape[1], w = albedo.shape[2];
    const double gx = std::clamp(x, 0.0, 1.0) * (w - 1);
    const double gy = std::clamp(y, 0.0, 1.0) * (h - 1);
    const int x0 = std::min(static_cast<int>(gx), w - 1);
    const int y0 = std::min(static_cast<int>(gy), h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = gx - x0, fy = gy - y0;
    const size_t plane = static_cast<size_t>(h) * w;
    double acc = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        const double* a = albedo.ptr() + ch * plane;
        const double top = a[static_cast<size_t>(y0) * w + x0] * (1.0 - fx) + a[static_cast<size_t>(y0) * w + x1] * fx;
        const double bot = a[static_cast<size_t>(y1) * w + x0] * (1.0 - fx) + a[static_cast<size_t>(y1) * w + x1] * fx;
        acc += top * (1.0 - fy) + bot * fy;
    }
    return acc / 3.0;
}

std::map<int, double> lightness_table(const Tensor& albedo, const JudgementSet& js) {
    std::map<int, double> table;
    for (const Point& p : js.points) table[p.id] = lightness(albedo, p.x, p.y);
    return table;
}

double lightness_difference(double l1, double l2, DiffMode mode) {
    if (mode == DiffMode::kLinear) return l1 - l2;
    return std::log(std::max(l1, kLogFloor)) - std::log(std::max(l2, kLogFloor));
}

char predict(double l1, double l2, const PredictionRule& rule) {
    rule.validate();
    const double d = lightness_difference(l1, l2, rule.mode);
    if (std::abs(d) <= rule.threshold) return 'E';
    // larger lightness means lighter, so a positive difference darkens point2
    return d > 0.0 ? '2' : '1';
}

double whdr(const JudgementSet& js, const std::map<int, double>& lightness, const PredictionRule& rule) {
    rule.validate();
    double num = 0.0, den = 0.0;
    for (const Comparison& c : js.comparisons) {
        const auto l1 = lightness.find(c.point1);
        const auto l2 = lightness.find(c.point2);
        if (l1 == lightness.end() || l2 == lightness.end())
            throw ConfigError("whdr: lightness missing for a referenced point");
        if (predict(l1->second, l2->second, rule) != c.darker) num += c.weight;
        den += c.weight;
    }
    if (!(den > 0.0)) throw ConfigError("whdr: zero total judgement weight");
    return num / den;
}

OracleResult oracle_threshold(const JudgementSet& js, const std::map<int, double>& lightness,
                              DiffMode mode) {
    std::vector<double> diff, weight;
    std::vector<char> label;
    diff.reserve(js.comparisons.size());
    for (const Comparison& c : js.comparisons) {
        const auto l1 = lightness.find(c.point1);
        const auto l2 = lightness.find(c.point2);
        if (l1 == lightness.end() || l2 == lightness.end())
            throw ConfigError("whdr: lightness missing for a referenced point");
        diff.push_back(lightness_difference(l1->second, l2->second, mode));
        label.push_back(c.darker);
        weight.push_back(c.weight);
    }

    std::vector<double> breaks;
    breaks.reserve(diff.size());
    for (double d : diff) breaks.push_back(std::abs(d));
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (breaks.empty()) throw ConfigError("oracle threshold needs at least one comparison");

    // WHDR is constant on [b_i, b_{i+1}); scan one representative per interval
    std::vector<double> candidates;
    if (breaks.front() > 0.0) candidates.push_back(breaks.front() / 2.0);
    for (size_t i = 1; i < breaks.size(); ++i) candidates.push_back((breaks[i - 1] + breaks[i]) / 2.0);
    candidates.push_back(breaks.back() + 1.0);

    OracleResult best;
    best.tau = candidates.front();
    best.whdr = whdr_at(diff, label, weight, best.tau);
    for (size_t i = 1; i < candidates.size(); ++i) {
        const double v = whdr_at(diff, label, weight, candidates[i]);
        if (v < best.whdr) {
            best.whdr = v;
            best.tau = candidates[i];
        }
    }
    return best;
}

double heldout_threshold(const JudgementSet& train, const std::map<int, double>& lightness,
                         DiffMode mode) {
    return oracle_threshold(train, lightness, mode).tau;
}

std::vector<std::vector<int>> simulated_test_sets(const std::vector<int>& ids, double p, int n_sets,
                                                  Rng& rng) {
    if (ids.empty()) throw ConfigError("simulated test sets need at least one image id");
    if (!(p > 0.0) || p > 1.0) throw ConfigError("inclusion probability must be in (0,1]");
    if (n_sets < 1) throw ConfigError("n_sets must be >= 1");
    std::vector<std::vector<int>> sets;
    sets.reserve(static_cast<size_t>(n_sets));
    for (int s = 0; s < n_sets; ++s) {
        std::vector<int> set;
        do {
            set.clear();
            for (int id : ids)
                if (rng.uniform() < p) set.push_back(id);
        } while (set.empty());
        sets.push_back(std::move(set));
    }
    return sets;
}

nlohmann::json BoxplotStats::to_json() const {
    return {{"median", median},   {"q25", q25},
            {"q75", q75},         {"notch", notch},
            {"whisker_lo", whisker_lo}, {"whisker_hi", whisker_hi},
            {"outliers", outliers}};
}

BoxplotStats boxplot_stats(std::vector<double> values) {
    if (values.empty()) throw ConfigError("boxplot stats need at least one value");
    std::sort(values.begin(), values.end());
    BoxplotStats st;
    st.median = quantile(values, 0.5);
    st.q25 = quantile(values, 0.25);
    st.q75 = quantile(values, 0.75);
    const double iqr = st.q75 - st.q25;
    st.notch = 1.57 * iqr / std::sqrt(static_cast<double>(values.size()));
    const double lo_fence = st.q25 - 1.5 * iqr;
    const double hi_fence = st.q75 + 1.5 * iqr;
    st.whisker_lo = st.q25;
    st.whisker_hi = st.q75;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            st.outliers.push_back(v);
        } else {
            st.whisker_lo = std::min(st.whisker_lo, v);
            st.whisker_hi = std::max(st.whisker_hi, v);
        }
    }
    return st;
}

BootstrapResult bootstrap_whdr(const std::vector<ImageEval>& images,
                               const std::vector<std::vector<int>>& sets, const PredictionRule& rule) {
    rule.validate();
    // per-image wrong weight and total weight, pooled per set
    std::vector<double> num(images.size(), 0.0), den(images.size(), 0.0);
    for (size_t i = 0; i < images.size(); ++i) {
        const ImageEval& im = images[i];
        for (const Comparison& c : im.judgements.comparisons) {
            const auto l1 = im.lightness.find(c.point1);
            const auto l2 = im.lightness.find(c.point2);
            if (l1 == im.lightness.end() || l2 == im.lightness.end())
                throw ConfigError("whdr: lightness missing for a referenced point");
            if (predict(l1->second, l2->second, rule) != c.darker) num[i] += c.weight;
            den[i] += c.weight;
        }
    }

    BootstrapResult out;
    out.whdrs.reserve(sets.size());
    for (const std::vector<int>& set : sets) {
        if (set.empty()) throw ConfigError("bootstrap: empty simulated set");
        double n = 0.0, d = 0.0;
        for (int id : set) {
            if (id < 0 || static_cast<size_t>(id) >= images.size())
                throw ConfigError("bootstrap: image id out of range");
            n += num[static_cast<size_t>(id)];
            d += den[static_cast<size_t>(id)];
        }
        if (!(d > 0.0)) throw ConfigError("bootstrap: zero total weight in a set");
        out.whdrs.push_back(n / d);
    }
    out.stats = boxplot_stats(out.whdrs);
    return out;
}

TreatmentResult treatment_effect(const std::vector<double>& whdrs_a, const std::vector<double>& whdrs_b) {
    if (whdrs_a.size() != whdrs_b.size())
        throw ConfigError("treatment effect needs the same simulated sets for both models");
    if (whdrs_a.empty()) throw ConfigError("treatment effect needs at least one set");
    TreatmentResult out;
    out.differences.reserve(whdrs_a.size());
    for (size_t i = 0; i < whdrs_a.size(); ++i) out.differences.push_back(whdrs_a[i] - whdrs_b[i]);
    out.stats = boxplot_stats(out.differences);
    return out;
}

double averaging_variance(const infer::TileModel& model, infer::AveragingConfig cfg,
                          const std::vector<Tensor>& images, const std::vector<JudgementSet>& judgements,
                          const PredictionRule& rule, int repeats, std::vector<double>* whdrs) {
    if (repeats < 2) throw ConfigError("averaging variance needs repeats >= 2");
    if (images.size() != judgements.size()) throw ConfigError("images/judgements count mismatch");
    if (images.empty()) throw ConfigError("averaging variance needs at least one image");
    const uint64_t base = cfg.seed;

    std::vector<double> ws;
    ws.reserve(static_cast<size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        cfg.seed = streams::sub(base, static_cast<uint64_t>(r));
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < images.size(); ++i) {
            const Decomposition d = infer::decompose_image(model, images[i], cfg);
            const std::map<int, double> table = lightness_table(d.albedo, judgements[i]);
            for (const Comparison& c : judgements[i].comparisons) {
                if (predict(table.at(c.point1), table.at(c.point2), rule) != c.darker) num += c.weight;
                den += c.weight;
            }
        }
        if (!(den > 0.0)) throw ConfigError("averaging variance: zero total weight");
        ws.push_back(num / den);
    }
    if (whdrs) *whdrs = ws;

    double mean = 0.0;
    for (double w : ws) mean += w;
    mean /= static_cast<double>(ws.size());
    double acc = 0.0;
    for (double w : ws) acc += (w - mean) * (w - mean);
    return std::sqrt(acc / static_cast<double>(ws.size() - 1));
}

}  // namespace iik::whdr
