#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "doctest.h"
#include "iik/whdr.hpp"
#include "testutil.hpp"

using namespace iik;

namespace {

whdr::JudgementSet two_point_set(double w1 = 1.0, double w2 = 1.0, char lab1 = '2', char lab2 = 'E') {
    whdr::JudgementSet js;
    js.points = {{1, 0.1, 0.1}, {2, 0.9, 0.9}, {3, 0.5, 0.5}, {4, 0.2, 0.8}};
    js.comparisons = {{1, 2, lab1, w1}, {3, 4, lab2, w2}};
    return js;
}

// independent quartile computation for the sort-based oracle
double oracle_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = static_cast<size_t>(std::ceil(h));
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

class ConstantModel : public infer::TileModel {
  public:
    ConstantModel(int tile, double a, double s) : tile_(tile), a_(a), s_(s) {}
    int tile() const override { return tile_; }
    void run(const Tensor& rgb, Tensor& albedo, Tensor& shading, Tensor& color) const override {
        albedo = Tensor({rgb.shape[0], 3, rgb.shape[2], rgb.shape[3]}, a_);
        shading = Tensor({rgb.shape[0], 1, rgb.shape[2], rgb.shape[3]}, s_);
        color = Tensor({rgb.shape[0], 3}, 1.0);
    }

  private:
    int tile_;
    double a_, s_;
};

// albedo = tile mean: sensitive to the jittered layout
class MeanModel : public infer::TileModel {
  public:
    explicit MeanModel(int tile) : tile_(tile) {}
    int tile() const override { return tile_; }
    void run(const Tensor& rgb, Tensor& albedo, Tensor& shading, Tensor& color) const override {
        const int n = rgb.shape[0], t = rgb.shape[2];
        albedo = Tensor({n, 3, t, t});
        shading = Tensor({n, 1, t, t}, 1.0);
        color = Tensor({n, 3}, 1.0);
        const size_t ex = static_cast<size_t>(3) * t * t;
        for (int i = 0; i < n; ++i) {
            double m = 0.0;
            for (size_t e = 0; e < ex; ++e) m += rgb.data[i * ex + e];
            m /= static_cast<double>(ex);
            for (size_t e = 0; e < ex; ++e) albedo.data[i * ex + e] = m;
        }
    }

  private:
    int tile_;
};

}  // namespace

TEST_CASE("lightness is the bilinear channel mean") {
    Tensor albedo({3, 4, 5});
    for (size_t i = 0; i < albedo.size(); ++i) albedo.data[i] = 0.0;
    const size_t plane = 20;
    for (size_t p = 0; p < plane; ++p) {
        albedo.data[p] = 0.2;
        albedo.data[plane + p] = 0.4;
        albedo.data[2 * plane + p] = 0.6;
    }
    for (double x : {0.0, 0.37, 0.83, 1.0})
        for (double y : {0.0, 0.5, 1.0})
            CHECK(whdr::lightness(albedo, x, y) == doctest::Approx(0.4).epsilon(1e-14));

    // grayscale: the value itself, exactly at pixel centers
    Tensor gray({3, 3, 4});
    Rng rng(2, 0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) {
            const double v = rng.uniform();
            for (int ch = 0; ch < 3; ++ch) gray.data[(static_cast<size_t>(ch) * 3 + y) * 4 + x] = v;
        }
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(whdr::lightness(gray, x / 3.0, y / 2.0) ==
                  doctest::Approx(gray.data[static_cast<size_t>(y) * 4 + x]).epsilon(1e-12));

    // hand bilinear blend on a 2x2 single-channel-replicated image
    Tensor quad({3, 2, 2});
    const double vals[4] = {0.0, 1.0, 2.0, 3.0};
    for (int ch = 0; ch < 3; ++ch)
        for (int p = 0; p < 4; ++p) quad.data[static_cast<size_t>(ch) * 4 + p] = vals[p];
    CHECK(whdr::lightness(quad, 0.5, 0.5) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(whdr::lightness(quad, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(whdr::lightness(quad, 0.25, 0.0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("prediction thresholds and antisymmetry") {
    whdr::PredictionRule rule;
    rule.threshold = 0.1;
    CHECK(whdr::predict(0.5, 0.3, rule) == '2');
    CHECK(whdr::predict(0.5, 0.45, rule) == 'E');
    CHECK(whdr::predict(0.3, 0.5, rule) == '1');
    for (double tau : {1e-6, 0.1, 10.0}) {
        whdr::PredictionRule r{whdr::DiffMode::kLinear, tau};
        CHECK(whdr::predict(0.4, 0.4, r) == 'E');
    }
    // boundary |d| == tau counts as equal (exactly representable values)
    whdr::PredictionRule quarter{whdr::DiffMode::kLinear, 0.25};
    CHECK(whdr::predict(0.75, 0.5, quarter) == 'E');

    Rng rng(3, 0);
    for (int i = 0; i < 200; ++i) {
        const double l1 = rng.uniform(), l2 = rng.uniform();
        whdr::PredictionRule r{i % 2 ? whdr::DiffMode::kLog : whdr::DiffMode::kLinear,
                               rng.uniform(0.01, 0.5)};
        const char fwd = whdr::predict(l1, l2, r);
        const char bwd = whdr::predict(l2, l1, r);
        if (fwd == 'E') CHECK(bwd == 'E');
        if (fwd == '1') CHECK(bwd == '2');
        if (fwd == '2') CHECK(bwd == '1');
    }

    // log mode uses the ratio, with a floor absorbing zeros
    whdr::PredictionRule logr{whdr::DiffMode::kLog, 0.5};
    CHECK(whdr::predict(0.2, 0.1, logr) == '2');   // ln 2 > 0.5
    CHECK(whdr::predict(0.12, 0.1, logr) == 'E');  // ln 1.2 < 0.5
    CHECK(std::isfinite(whdr::lightness_difference(0.0, 0.5, whdr::DiffMode::kLog)));
    CHECK(whdr::predict(0.0, 1.0, logr) == '1');

    whdr::PredictionRule bad{whdr::DiffMode::kLinear, 0.0};
    CHECK_THROWS_AS(whdr::predict(0.1, 0.2, bad), ConfigError);
}

TEST_CASE("whdr pools weighted disagreements") {
    // weight-1 comparison wrong, weight-2 right -> 1/3
    whdr::JudgementSet js = two_point_set(1.0, 2.0, '1', 'E');
    std::map<int, double> table{{1, 0.8}, {2, 0.3}, {3, 0.5}, {4, 0.52}};
    whdr::PredictionRule rule;  // tau 0.1
    // comparison 1: d = 0.5 -> predicted '2', label '1': wrong
    // comparison 2: |d| = 0.02 -> 'E', label 'E': right
    CHECK(whdr::whdr(js, table, rule) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    js.comparisons[0].darker = '2';
    CHECK(whdr::whdr(js, table, rule) == 0.0);

    // invariant under weight rescaling
    whdr::JudgementSet scaled = js;
    for (auto& c : scaled.comparisons) c.weight *= 3.7;
    js.comparisons[1].darker = '1';
    scaled.comparisons[1].darker = '1';
    CHECK(whdr::whdr(js, table, rule) == doctest::Approx(whdr::whdr(scaled, table, rule)).epsilon(1e-14));

    // huge tau predicts equal everywhere: weighted fraction of non-equal labels
    whdr::PredictionRule wide{whdr::DiffMode::kLinear, 100.0};
    CHECK(whdr::whdr(js, table, wide) == 1.0);  // labels 2,1 both non-equal
    const whdr::JudgementSet mixed = two_point_set(1.0, 2.0, '2', 'E');
    CHECK(whdr::whdr(mixed, table, wide) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    whdr::JudgementSet zero = two_point_set(0.0, 0.0);
    CHECK_THROWS_AS(whdr::whdr(zero, table, rule), ConfigError);
    std::map<int, double> missing{{1, 0.8}, {2, 0.3}, {3, 0.5}};
    CHECK_THROWS_AS(whdr::whdr(js, missing, rule), ConfigError);
}

TEST_CASE("whdr equals a naive double loop on random sets") {
    Rng rng(11, 0);
    for (int trial = 0; trial < 100; ++trial) {
        whdr::JudgementSet js;
        std::map<int, double> table;
        for (int p = 0; p < 6; ++p) {
            js.points.push_back({p, rng.uniform(), rng.uniform()});
            table[p] = rng.uniform();
        }
        const char labels[3] = {'1', '2', 'E'};
        for (int c = 0; c < 8; ++c)
            js.comparisons.push_back({static_cast<int>(rng.uniform_int(6)),
                                      static_cast<int>(rng.uniform_int(6)),
                                      labels[rng.uniform_int(3)], rng.uniform(0.0, 2.0)});
        js.comparisons[0].weight += 0.1;  // guard against an all-zero draw
        whdr::PredictionRule rule{trial % 2 ? whdr::DiffMode::kLog : whdr::DiffMode::kLinear,
                                  rng.uniform(0.02, 0.4)};

        double num = 0.0, den = 0.0;
        for (const auto& c : js.comparisons) {
            const double l1 = table.at(c.point1), l2 = table.at(c.point2);
            const double d = rule.mode == whdr::DiffMode::kLog
                                 ? std::log(std::max(l1, 1e-4)) - std::log(std::max(l2, 1e-4))
                                 : l1 - l2;
            char pred = 'E';
            if (std::abs(d) > rule.threshold) pred = d > 0 ? '2' : '1';
            if (pred != c.darker) num += c.weight;
            den += c.weight;
        }
        CHECK(whdr::whdr(js, table, rule) == num / den);
    }
}

TEST_CASE("oracle threshold scans breakpoints exactly") {
    // single comparison labeled equal with |d| = 0.2: any tau above is perfect
    whdr::JudgementSet one;
    one.points = {{1, 0.0, 0.0}, {2, 1.0, 1.0}};
    one.comparisons = {{1, 2, 'E', 1.0}};
    std::map<int, double> t1{{1, 0.5}, {2, 0.3}};
    const auto r1 = whdr::oracle_threshold(one, t1, whdr::DiffMode::kLinear);
    CHECK(r1.whdr == 0.0);
    CHECK(r1.tau > 0.2);

    // tie between a small and a large threshold resolves toward the smaller
    whdr::JudgementSet tie = two_point_set(1.0, 1.0, '2', 'E');
    std::map<int, double> t2{{1, 0.5}, {2, 0.3}, {3, 0.5}, {4, 0.1}};
    const auto r2 = whdr::oracle_threshold(tie, t2, whdr::DiffMode::kLinear);
    CHECK(r2.whdr == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r2.tau == doctest::Approx(0.1).epsilon(1e-12));

    // dominance and grid-scan agreement on lattice-valued tables
    Rng rng(13, 0);
    for (int trial = 0; trial < 200; ++trial) {
        whdr::JudgementSet js;
        std::map<int, double> table;
        for (int p = 0; p < 6; ++p) {
            js.points.push_back({p, 0.5, 0.5});
            table[p] = static_cast<double>(rng.uniform_int(101)) / 100.0;
        }
        const char labels[3] = {'1', '2', 'E'};
        const int nc = 2 + static_cast<int>(rng.uniform_int(7));
        for (int c = 0; c < nc; ++c)
            js.comparisons.push_back({static_cast<int>(rng.uniform_int(6)),
                                      static_cast<int>(rng.uniform_int(6)),
                                      labels[rng.uniform_int(3)], rng.uniform(0.1, 2.0)});

        const auto best = whdr::oracle_threshold(js, table, whdr::DiffMode::kLinear);
        for (double tau : {whdr::kTauDefault, whdr::kTauAlternative}) {
            whdr::PredictionRule rule{whdr::DiffMode::kLinear, tau};
            CHECK(best.whdr <= whdr::whdr(js, table, rule));
        }

        double grid_best = 2.0;
        for (int g = 1; g <= 10000; ++g) {
            whdr::PredictionRule rule{whdr::DiffMode::kLinear, 1.2 * g / 10000.0};
            grid_best = std::min(grid_best, whdr::whdr(js, table, rule));
        }
        CHECK(best.whdr == grid_best);
    }
}

TEST_CASE("held-out threshold reuses the oracle on the training split") {
    Rng rng(17, 0);
    whdr::JudgementSet train, test;
    std::map<int, double> table;
    const char labels[3] = {'1', '2', 'E'};
    for (int p = 0; p < 10; ++p) {
        train.points.push_back({p, 0.5, 0.5});
        test.points.push_back({p, 0.5, 0.5});
        table[p] = rng.uniform();
    }
    for (int c = 0; c < 12; ++c) {
        train.comparisons.push_back({static_cast<int>(rng.uniform_int(10)),
                                     static_cast<int>(rng.uniform_int(10)),
                                     labels[rng.uniform_int(3)], 1.0});
        test.comparisons.push_back({static_cast<int>(rng.uniform_int(10)),
                                    static_cast<int>(rng.uniform_int(10)),
                                    labels[rng.uniform_int(3)], 1.0});
    }
    const double tau = whdr::heldout_threshold(train, table, whdr::DiffMode::kLinear);
    CHECK(tau == whdr::oracle_threshold(train, table, whdr::DiffMode::kLinear).tau);

    const auto test_oracle = whdr::oracle_threshold(test, table, whdr::DiffMode::kLinear);
    whdr::PredictionRule heldout{whdr::DiffMode::kLinear, tau};
    CHECK(whdr::whdr(test, table, heldout) >= test_oracle.whdr);
}

TEST_CASE("simulated test sets follow the inclusion law") {
    std::vector<int> ids;
    for (int i = 0; i < 500; ++i) ids.push_back(i);

    Rng all(5, 0);
    for (const auto& set : whdr::simulated_test_sets(ids, 1.0, 5, all)) CHECK(set.size() == 500);

    Rng ra(6, 0), rb(6, 0);
    CHECK(whdr::simulated_test_sets(ids, 0.2, 10, ra) == whdr::simulated_test_sets(ids, 0.2, 10, rb));

    Rng rng(7, 0);
    const auto sets = whdr::simulated_test_sets(ids, 0.2, 50, rng);
    REQUIRE(sets.size() == 50);
    double mean = 0.0;
    for (const auto& s : sets) mean += static_cast<double>(s.size());
    mean /= 50.0;
    const double sigma = std::sqrt(500.0 * 0.2 * 0.8 / 50.0);
    CHECK(std::abs(mean - 100.0) <= 3.0 * sigma);

    // tiny inclusion probability: the empty-set redraw keeps sets nonempty
    std::vector<int> few{1, 2, 3};
    Rng sparse(8, 0);
    for (const auto& s : whdr::simulated_test_sets(few, 0.001, 20, sparse)) CHECK(!s.empty());

    CHECK_THROWS_AS(whdr::simulated_test_sets({}, 0.2, 5, rng), ConfigError);
    CHECK_THROWS_AS(whdr::simulated_test_sets(ids, 0.0, 5, rng), ConfigError);
}

TEST_CASE("boxplot statistics match hand values and flag outliers") {
    const auto st = whdr::boxplot_stats({4.0, 1.0, 3.0, 2.0});
    CHECK(st.q25 == doctest::Approx(1.75).epsilon(1e-14));
    CHECK(st.median == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(st.q75 == doctest::Approx(3.25).epsilon(1e-14));
    CHECK(st.notch == doctest::Approx(1.57 * 1.5 / 2.0).epsilon(1e-12));
    CHECK(st.whisker_lo == 1.0);
    CHECK(st.whisker_hi == 4.0);
    CHECK(st.outliers.empty());

    std::vector<double> spiked(9, 0.0);
    spiked.push_back(10.0);
    const auto sp = whdr::boxplot_stats(spiked);
    REQUIRE(sp.outliers.size() == 1);
    CHECK(sp.outliers[0] == 10.0);
    CHECK(sp.whisker_hi == 0.0);

    const auto single = whdr::boxplot_stats({0.17});
    CHECK(single.median == 0.17);
    CHECK(single.q25 == 0.17);
    CHECK(single.whisker_lo == 0.17);

    Rng rng(9, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v;
        const int n = 1 + static_cast<int>(rng.uniform_int(40));
        for (int i = 0; i < n; ++i) v.push_back(rng.uniform());
        const auto s = whdr::boxplot_stats(v);
        CHECK(s.q25 <= s.median);
        CHECK(s.median <= s.q75);
        CHECK(s.whisker_lo >= s.q25 - 1.5 * (s.q75 - s.q25) - 1e-12);
        CHECK(s.whisker_hi <= s.q75 + 1.5 * (s.q75 - s.q25) + 1e-12);
        // independent sort-based recomputation
        CHECK(s.median == oracle_quantile(v, 0.5));
        CHECK(s.q25 == oracle_quantile(v, 0.25));
        CHECK(s.q75 == oracle_quantile(v, 0.75));
    }
    CHECK_THROWS_AS(whdr::boxplot_stats({}), ConfigError);
}

TEST_CASE("bootstrap pools comparisons over simulated sets") {
    Rng rng(21, 0);
    std::vector<whdr::ImageEval> images;
    for (int i = 0; i < 20; ++i) {
        whdr::ImageEval ev;
        const char labels[3] = {'1', '2', 'E'};
        for (int p = 0; p < 4; ++p) {
            ev.judgements.points.push_back({p, 0.5, 0.5});
            ev.lightness[p] = rng.uniform();
        }
        for (int c = 0; c < 5; ++c)
            ev.judgements.comparisons.push_back({static_cast<int>(rng.uniform_int(4)),
                                                 static_cast<int>(rng.uniform_int(4)),
                                                 labels[rng.uniform_int(3)], rng.uniform(0.5, 2.0)});
        images.push_back(std::move(ev));
    }
    std::vector<int> ids;
    for (int i = 0; i < 20; ++i) ids.push_back(i);
    Rng srng(22, 0);
    const auto sets = whdr::simulated_test_sets(ids, 0.4, 30, srng);
    whdr::PredictionRule rule;
    const auto boot = whdr::bootstrap_whdr(images, sets, rule);
    REQUIRE(boot.whdrs.size() == 30);

    // against a direct per-set recomputation
    for (size_t s = 0; s < sets.size(); ++s) {
        double num = 0.0, den = 0.0;
        for (int id : sets[s])
            for (const auto& c : images[static_cast<size_t>(id)].judgements.comparisons) {
                const auto& lt = images[static_cast<size_t>(id)].lightness;
                if (whdr::predict(lt.at(c.point1), lt.at(c.point2), rule) != c.darker) num += c.weight;
                den += c.weight;
            }
        CHECK(boot.whdrs[s] == doctest::Approx(num / den).epsilon(1e-14));
    }
    CHECK(boot.stats.median == oracle_quantile(boot.whdrs, 0.5));

    // identical per-image behavior: every set pools to the same ratio
    std::vector<whdr::ImageEval> same;
    for (int i = 0; i < 6; ++i) {
        whdr::ImageEval ev;
        ev.judgements.points = {{0, 0.2, 0.2}, {1, 0.8, 0.8}};
        ev.judgements.comparisons = {{0, 1, '2', 1.0}, {0, 1, 'E', 1.0}};
        ev.lightness = {{0, 0.9}, {1, 0.1}};  // '2' right, 'E' wrong
        same.push_back(ev);
    }
    Rng srng2(23, 0);
    const auto ssets = whdr::simulated_test_sets(ids = {0, 1, 2, 3, 4, 5}, 0.5, 12, srng2);
    const auto sboot = whdr::bootstrap_whdr(same, ssets, rule);
    for (double w : sboot.whdrs) CHECK(w == 0.5);
    CHECK(sboot.stats.q75 - sboot.stats.q25 == 0.0);
    CHECK(sboot.stats.outliers.empty());

    CHECK_THROWS_AS(whdr::bootstrap_whdr(same, {{99}}, rule), ConfigError);
    CHECK_THROWS_AS(whdr::bootstrap_whdr(same, {std::vector<int>{}}, rule), ConfigError);
}

TEST_CASE("treatment effects are per-set differences") {
    const std::vector<double> a{0.17, 0.18, 0.16};
    auto eq = whdr::treatment_effect(a, a);
    for (double d : eq.differences) CHECK(d == 0.0);

    std::vector<double> b;
    for (double v : a) b.push_back(v + 0.002);  // a is uniformly 0.002 better
    const auto tr = whdr::treatment_effect(a, b);
    for (double d : tr.differences) CHECK(d == doctest::Approx(-0.002).epsilon(1e-12));
    CHECK(tr.stats.median == doctest::Approx(-0.002).epsilon(1e-12));

    CHECK_THROWS_AS(whdr::treatment_effect(a, {0.1}), ConfigError);
}

TEST_CASE("averaging variance measures layout-induced spread") {
    whdr::JudgementSet js;
    js.points = {{0, 0.1, 0.1}, {1, 0.9, 0.9}};
    js.comparisons = {{0, 1, '2', 1.0}, {0, 1, 'E', 0.5}};

    Tensor image({3, 96, 96});
    Rng rng(31, 0);
    testutil::fill_uniform(image, rng, 0.05, 1.0);

    infer::AveragingConfig cfg;
    cfg.n_tiles = 3;
    cfg.n_scales = 1;
    cfg.seed = 4;

    const ConstantModel constant(32, 0.5, 0.5);
    whdr::PredictionRule rule;
    std::vector<double> ws;
    const double std0 = whdr::averaging_variance(constant, cfg, {image}, {js}, rule, 4, &ws);
    CHECK(std0 == 0.0);
    REQUIRE(ws.size() == 4);
    for (double w : ws) CHECK(w == ws[0]);

    const MeanModel mean(32);
    std::vector<double> w2;
    const double std2 = whdr::averaging_variance(mean, cfg, {image}, {js}, rule, 2, &w2);
    REQUIRE(w2.size() == 2);
    CHECK(std2 == doctest::Approx(std::abs(w2[0] - w2[1]) / std::sqrt(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(whdr::averaging_variance(mean, cfg, {image}, {js}, rule, 1, nullptr), ConfigError);
}

TEST_CASE("judgement sets round trip through iiw-style json") {
    whdr::JudgementSet js = two_point_set(1.5, 0.5, '1', 'E');
    const nlohmann::json j = js.to_json();
    CHECK(j.contains("points"));
    CHECK(j.contains("intrinsic_comparisons"));
    CHECK(j["points"][0].contains("id"));
    CHECK(j["intrinsic_comparisons"][0]["darker"] == "1");
    CHECK(j["intrinsic_comparisons"][0]["darker_score"] == doctest::Approx(1.5));

    const auto back = whdr::JudgementSet::from_json(j);
    REQUIRE(back.points.size() == js.points.size());
    REQUIRE(back.comparisons.size() == js.comparisons.size());
    CHECK(back.comparisons[0].darker == '1');
    CHECK(back.comparisons[0].weight == doctest::Approx(1.5));
    CHECK(back.points[1].x == doctest::Approx(0.9));

    const auto dir = std::filesystem::temp_directory_path() / "iik_test_judgements.json";
    whdr::save_judgements(dir.string(), js);
    const auto loaded = whdr::load_judgements(dir.string());
    CHECK(loaded.comparisons.size() == js.comparisons.size());
    CHECK(loaded.comparisons[1].darker == 'E');
    std::filesystem::remove(dir);

    CHECK_THROWS_AS(whdr::load_judgements("/nonexistent/judgements.json"), IoError);

    whdr::JudgementSet bad = js;
    bad.comparisons[0].point1 = 99;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    whdr::JudgementSet badw = js;
    badw.comparisons[0].weight = -1.0;
    CHECK_THROWS_AS(badw.validate(), ConfigError);
    whdr::JudgementSet badp = js;
    badp.points[0].x = 1.5;
    CHECK_THROWS_AS(badp.validate(), ConfigError);
    nlohmann::json badj = j;
    badj["intrinsic_comparisons"][0]["darker"] = "X";
    CHECK_THROWS_AS(whdr::JudgementSet::from_json(badj), ConfigError);
}
