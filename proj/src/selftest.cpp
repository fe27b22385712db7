#include "iik/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "iik/autodiff.hpp"
#include "iik/d4.hpp"
#include "iik/decomposer.hpp"
#include "iik/decomposition.hpp"
#include "iik/discriminator.hpp"
#include "iik/inference.hpp"
#include "iik/polish.hpp"
#include "iik/rng.hpp"
#include "iik/training.hpp"
#include "iik/whdr.hpp"

namespace iik::selftest {

namespace {

char fmt_buf[128];

std::string fmt(const char* pattern, double v) {
    std::snprintf(fmt_buf, sizeof(fmt_buf), pattern, v);
    return fmt_buf;
}

CheckResult timed(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    CheckResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const auto [pass, detail] = body();
        r.pass = pass;
        r.detail = detail;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// first-order update cancels the residual: eff*ds + s*dp = r
std::pair<bool, std::string> check_polish_identity() {
    const int h = 100, w = 100;
    Rng rng(101, 0);
    Decomposition d;
    d.albedo = Tensor({3, h, w});
    d.shading = Tensor({1, h, w});
    d.color = Tensor({3, h, w});
    Tensor image({3, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t p = 0; p < plane; ++p) {
        d.shading.data[p] = rng.uniform(0.3, 1.0);
        for (int ch = 0; ch < 3; ++ch) {
            const size_t i = static_cast<size_t>(ch) * plane + p;
            d.albedo.data[i] = rng.uniform(0.2, 1.0);
            d.color.data[i] = rng.uniform(0.5, 1.5);
            image.data[i] = d.albedo.data[i] * d.shading.data[p] * d.color.data[i] +
                            rng.uniform(-0.05, 0.05);
        }
    }
    const Decomposition before = d;
    polish::PolishConfig cfg;
    cfg.iterations = 1;
    polish::polish_step(image, d, cfg);
    double worst = 0.0;
    for (size_t p = 0; p < plane; ++p) {
        const double ds = d.shading.data[p] - before.shading.data[p];
        for (int ch = 0; ch < 3; ++ch) {
            const size_t i = static_cast<size_t>(ch) * plane + p;
            const double eff0 = before.albedo.data[i] * before.color.data[i];
            const double eff1 = d.albedo.data[i] * d.color.data[i];
            const double r = image.data[i] - eff0 * before.shading.data[p];
            worst = std::max(worst, std::abs(eff0 * ds + before.shading.data[p] * (eff1 - eff0) - r));
        }
    }
    return {worst < 1e-9, fmt("max identity error %.2e", worst)};
}

std::pair<bool, std::string> check_window() {
    const Tensor win = infer::weight_window(128, 1.0);
    double lo = 2.0, hi = 0.0;
    for (double v : win.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo <= 0.0 || hi != 1.0) return {false, fmt("range violation, min %.2e", lo)};
    if (win.data[static_cast<size_t>(39) * 128 + 64] != 1.0)
        return {false, "ramp does not saturate at 40 px"};
    double sym = 0.0;
    for (int g = 0; g < d4::kCount; ++g) {
        const Tensor t = d4::apply(d4::element(g), win);
        for (size_t i = 0; i < t.size(); ++i) sym = std::max(sym, std::abs(t.data[i] - win.data[i]));
    }
    return {sym == 0.0, fmt("max symmetry defect %.2e", sym)};
}

std::pair<bool, std::string> check_whdr_oracle() {
    Rng rng(77, 0);
    const char labels[3] = {'1', '2', 'E'};
    int violations = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        whdr::JudgementSet js;
        std::map<int, double> table;
        for (int p = 0; p < 6; ++p) {
            js.points.push_back({p, 0.5, 0.5});
            table[p] = rng.uniform();
        }
        for (int c = 0; c < 8; ++c)
            js.comparisons.push_back({static_cast<int>(rng.uniform_int(6)),
                                      static_cast<int>(rng.uniform_int(6)),
                                      labels[rng.uniform_int(3)], rng.uniform(0.1, 2.0)});
        const auto best = whdr::oracle_threshold(js, table, whdr::DiffMode::kLinear);
        for (double tau : {whdr::kTauDefault, whdr::kTauAlternative}) {
            const double fixed = whdr::whdr(js, table, {whdr::DiffMode::kLinear, tau});
            if (best.whdr > fixed) ++violations;
            worst = std::max(worst, best.whdr - fixed);
        }
    }
    return {violations == 0, fmt("max dominance violation %.2e", std::max(worst, 0.0))};
}

std::pair<bool, std::string> check_rf_probe() {
    for (int rd : {10, 22, 29, 48, 128}) {
        const auto cfg = disc::DiscriminatorConfig::preset(rd);
        const int probed = disc::probe_footprint(cfg, 5);
        if (probed != rd) return {false, "preset " + std::to_string(rd) + " probed " + std::to_string(probed)};
    }
    return {true, "all five presets exact"};
}

std::pair<bool, std::string> check_equivariance() {
    dec::DecomposerConfig arch;
    arch.tile = 32;
    arch.base_width = 2;
    arch.max_width = 4;
    const auto params = dec::init_params<double>(arch, 21);
    const infer::NetworkModel<double> model(params);

    Tensor image({3, 48, 48});
    Rng rng(22, 0);
    for (auto& v : image.data) v = rng.uniform(0.05, 1.0);

    infer::AveragingConfig cfg;
    cfg.n_tiles = 2;
    cfg.n_scales = 1;
    cfg.orbit = infer::Orbit::kDiscreteImage;
    cfg.seed = 9;

    const Decomposition ref = infer::decompose_image(model, image, cfg);
    double worst = 0.0;
    for (int g = 0; g < d4::kCount; ++g) {
        const d4::Elem e = d4::element(g);
        const Decomposition got = infer::decompose_image(model, d4::apply(e, image), cfg);
        const Tensor wa = d4::apply(e, ref.albedo), ws = d4::apply(e, ref.shading);
        for (size_t i = 0; i < wa.size(); ++i) worst = std::max(worst, std::abs(got.albedo.data[i] - wa.data[i]));
        for (size_t i = 0; i < ws.size(); ++i) worst = std::max(worst, std::abs(got.shading.data[i] - ws.data[i]));
    }
    return {worst < 1e-9, fmt("max equivariance defect %.2e", worst)};
}

std::pair<bool, std::string> check_gradients() {
    dec::DecomposerConfig arch;
    arch.tile = 32;
    arch.base_width = 2;
    arch.max_width = 4;
    auto params = dec::init_params<double>(arch, 31);

    Rng rng(32, 0);
    const int n = 2;
    train::Batch<double> b{Tensor({n, 3, 32, 32}), Tensor({n, 1, 32, 32}), Tensor({n, 3}),
                           Tensor({n, 3, 32, 32})};
    for (auto& v : b.albedo.data) v = rng.uniform(0.1, 1.0);
    for (auto& v : b.shading.data) v = rng.uniform(0.2, 1.0);
    for (auto& v : b.color.data) v = rng.uniform(0.5, 1.5);
    for (auto& v : b.image.data) v = rng.uniform(0.05, 1.0);
    Tensor real({n, 3, 32, 32});
    for (auto& v : real.data) v = rng.uniform(0.05, 1.0);
    const Tensor ones({n}, 1.0);
    train::LossWeights w;

    // L_T on the paradigm batch plus L_R on the real batch, params shared
    const auto eval = [&](const dec::DecomposerParams<double>& p, std::vector<int>* ids1,
                          std::vector<int>* ids2, ad::Tape<double>& tape) {
        const auto h1 = dec::forward(tape, p, tape.constant(dec::assemble_input(arch, b.image)), ids1, true);
        const int lt = train::synthetic_loss(tape, h1, b, ones, ones, w, nullptr);
        const auto h2 = dec::forward(tape, p, tape.constant(dec::assemble_input(arch, real)), ids2, true);
        const int lr = train::real_loss(tape, h2, real, w, false, nullptr);
        return tape.scalar_comb({lt, lr}, {1.0, 1.0});
    };

    ad::Tape<double> tape;
    std::vector<int> ids1, ids2;
    tape.backward(eval(params, &ids1, &ids2, tape));

    double worst = 0.0;
    const double h = 1e-5;
    for (size_t bi = 0; bi < params.blocks.size(); ++bi) {
        for (size_t e : {size_t(0), params.blocks[bi].size() / 2}) {
            const double saved = params.blocks[bi].data[e];
            params.blocks[bi].data[e] = saved + h;
            ad::Tape<double> tp;
            const double fp = tp.value(eval(params, nullptr, nullptr, tp)).data[0];
            params.blocks[bi].data[e] = saved - h;
            ad::Tape<double> tm;
            const double fm = tm.value(eval(params, nullptr, nullptr, tm)).data[0];
            params.blocks[bi].data[e] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = tape.grad(ids1[bi]).data[e] + tape.grad(ids2[bi]).data[e];
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-3));
        }
    }
    return {worst < 1e-4, fmt("max relative gradient error %.2e", worst)};
}

}  // namespace

std::vector<CheckResult> run(bool quick) {
    std::vector<CheckResult> out;
    out.push_back(timed("polish identity", check_polish_identity));
    out.push_back(timed("window normalization", check_window));
    out.push_back(timed("whdr oracle dominance", check_whdr_oracle));
    out.push_back(timed("receptive field probe", check_rf_probe));
    out.push_back(timed("d4 equivariance", check_equivariance));
    if (!quick) out.push_back(timed("gradient check", check_gradients));
    return out;
}

int report(std::ostream& os, const std::vector<CheckResult>& results) {
    int failures = 0;
    for (const auto& r : results) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-24s %-4s %8.2fs  %s\n", r.name.c_str(),
                      r.pass ? "ok" : "FAIL", r.seconds, r.detail.c_str());
        os << line;
        if (!r.pass) ++failures;
    }
    os << (failures == 0 ? "all checks passed\n" : std::to_string(failures) + " check(s) failed\n");
    return failures;
}

}  // namespace iik::selftest
