#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "iik/field.hpp"
#include "iik/training.hpp"
#include "testutil.hpp"

using namespace iik;

namespace {

struct Fixture {
    paradigm::TileDictionary albedo, shading, real;
    dec::DecomposerConfig arch;
    disc::DiscriminatorConfig critic;
    train::TrainConfig cfg;
    train::LossWeights weights;
};

// tiny everything: tile 32, widths 2..4, four-example batches
Fixture make_fixture() {
    Fixture f;
    paradigm::ParadigmConfig pc;
    pc.tile = 32;

    Rng rng(1, 0);
    Tensor img({3, 64, 64});
    testutil::fill_uniform(img, rng, 0.05, 1.0);
    const paradigm::ColorPool pool = paradigm::build_color_pool({img}, 64, rng);

    f.albedo = paradigm::build_albedo_dictionary(11, pool, pc, 6);
    f.shading = paradigm::build_shading_dictionary(12, pc, 6);
    f.real = paradigm::build_real_dictionary(13, {img}, pc, 6);

    f.arch.tile = 32;
    f.arch.base_width = 2;
    f.arch.max_width = 4;

    f.critic.layers = {{3, 2, 1, 4}, {3, 1, 1, 1}};

    f.cfg.batch = 4;
    f.cfg.micro_batch = 2;
    f.cfg.total_images = 4 * 4;
    f.cfg.ema_interval = 8;
    f.cfg.checkpoint_interval = 0;
    f.cfg.seed = 7;
    return f;
}

template <typename T>
double max_param_diff(const dec::DecomposerParams<T>& a, const dec::DecomposerParams<T>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.blocks.size(); ++i)
        m = std::max(m, testutil::max_abs_diff(a.blocks[i], b.blocks[i]));
    return m;
}

template <typename T>
double max_param_diff(const disc::DiscriminatorParams<T>& a, const disc::DiscriminatorParams<T>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.blocks.size(); ++i)
        m = std::max(m, testutil::max_abs_diff(a.blocks[i], b.blocks[i]));
    return m;
}

}  // namespace

TEST_CASE("adam matches the hand recurrence") {
    std::vector<Tensor> blocks{Tensor({1}, 2.0)};
    auto st = train::init_adam(blocks);
    const double lr = 0.1, b1 = 0.5, b2 = 0.9, eps = 1e-8;

    // g = 4: m = 2, v = 1.6, mhat = 4, vhat = 16, step = 0.1*4/(4+1e-8)
    train::adam_step(blocks, {Tensor({1}, 4.0)}, st, lr, b1, b2, eps);
    CHECK(blocks[0].data[0] == doctest::Approx(2.0 - 0.1 * 4.0 / (4.0 + eps)).epsilon(1e-12));

    // second step, g = -2:
    // m = 0.5*2 + 0.5*(-2) = 0, v = 0.9*1.6 + 0.1*4 = 1.84
    // mhat = 0 / (1-0.25) = 0 -> no movement
    const double keep = blocks[0].data[0];
    train::adam_step(blocks, {Tensor({1}, -2.0)}, st, lr, b1, b2, eps);
    CHECK(blocks[0].data[0] == doctest::Approx(keep).epsilon(1e-12));
    CHECK(st.t == 2);
}

TEST_CASE("synthetic loss matches hand values") {
    // one example, constant fields: check the color term in isolation
    const int t = 4;
    train::Batch<double> b{Tensor({2, 3, t, t}, 0.5), Tensor({2, 1, t, t}, 0.5), Tensor({2, 3}, 1.0),
                           Tensor({2, 3, t, t})};
    for (int i = 0; i < 2; ++i)
        for (size_t e = 0; e < static_cast<size_t>(3 * t * t); ++e)
            b.image.data[static_cast<size_t>(i) * 3 * t * t + e] = 0.25;  // 0.5 * 0.5 * 1

    ad::Tape<double> tape;
    // predictions equal to the targets except color off by (0.1, 0, 0)
    Tensor chat({2, 3}, 1.0);
    chat.data[0] = 1.1;
    chat.data[3] = 1.1;
    const dec::Heads h{tape.constant(b.albedo), tape.constant(b.shading), tape.constant(chat)};

    train::LossWeights w;
    w.alpha_a = w.alpha_s = w.alpha_r = 0.0;
    const Tensor ones({2}, 1.0);
    train::SyntheticParts parts;
    const int loss = train::synthetic_loss(tape, h, b, ones, ones, w, &parts);
    CHECK(tape.value(loss).data[0] == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(parts.l_c == doctest::Approx(0.01).epsilon(1e-9));

    // perfect prediction -> exactly zero
    ad::Tape<double> tape2;
    const dec::Heads h2{tape2.constant(b.albedo), tape2.constant(b.shading), tape2.constant(b.color)};
    train::LossWeights w2;
    const int zero = train::synthetic_loss(tape2, h2, b, ones, ones, w2, nullptr);
    CHECK(tape2.value(zero).data[0] == 0.0);

    // masking gates exactly one of the albedo/shading terms per example
    ad::Tape<double> tape3;
    Tensor ahat = b.albedo;
    for (auto& v : ahat.data) v += 0.2;  // Huber 0.5*0.04 = 0.02 per element
    Tensor shat = b.shading;
    for (auto& v : shat.data) v += 0.4;  // Huber 0.5*0.16 = 0.08 per element
    const dec::Heads h3{tape3.constant(ahat), tape3.constant(shat), tape3.constant(b.color)};
    train::LossWeights w3;
    w3.alpha_c = w3.alpha_r = 0.0;
    Tensor mask_a({2}, 0.0), mask_s({2}, 0.0);
    mask_a.data[0] = 1.0;  // example 0 trains albedo only
    mask_s.data[1] = 1.0;  // example 1 trains shading only
    const int masked = train::synthetic_loss(tape3, h3, b, mask_a, mask_s, w3, nullptr);
    // (1/2)(0.02) + (1/2)(0.08)
    CHECK(tape3.value(masked).data[0] == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("real loss matches hand values") {
    const int t = 4;
    Tensor image({1, 3, t, t}, 0.25);
    ad::Tape<double> tape;
    Tensor chat({1, 3}, 1.0);
    chat.data[0] = 1.1;
    const dec::Heads h{tape.constant(Tensor({1, 3, t, t}, 0.5)), tape.constant(Tensor({1, 1, t, t}, 0.5)),
                       tape.constant(chat)};
    train::LossWeights w;
    w.alpha_rr = 0.0;
    train::RealParts parts;
    const int loss = train::real_loss(tape, h, image, w, false, &parts);
    // in-range outputs contribute nothing to the range penalty
    CHECK(parts.l_range == 0.0);
    CHECK(tape.value(loss).data[0] == doctest::Approx(0.01).epsilon(1e-9));

    // shading value 1.2 adds 0.2^2 to the (corrected) range term
    ad::Tape<double> tape2;
    Tensor shat({1, 1, t, t}, 0.5);
    shat.data[0] = 1.2;
    const dec::Heads h2{tape2.constant(Tensor({1, 3, t, t}, 0.5)), tape2.constant(shat),
                        tape2.constant(Tensor({1, 3}, 1.0))};
    train::LossWeights w2;
    w2.alpha_rr = w2.alpha_rc = 0.0;
    train::RealParts parts2;
    train::real_loss(tape2, h2, image, w2, false, &parts2);
    CHECK(parts2.l_range == doctest::Approx(0.04).epsilon(1e-9));
}

TEST_CASE("zeroed loss weights kill the corresponding gradients") {
    auto f = make_fixture();
    const auto model = dec::init_params<double>(f.arch, 3);
    Rng rng(4, 0);
    train::Batch<double> b = train::assemble_paradigm_batch<double>(f.albedo, f.shading, 2, rng);

    // alpha_a = alpha_r = 0: nothing reaches the albedo head
    ad::Tape<double> tape;
    std::vector<int> ids;
    const dec::Heads h =
        dec::forward(tape, model, tape.constant(dec::assemble_input(f.arch, b.image)), &ids, true);
    train::LossWeights w;
    w.alpha_a = 0.0;
    w.alpha_r = 0.0;
    const Tensor ones({2}, 1.0);
    tape.backward(train::synthetic_loss(tape, h, b, ones, ones, w, nullptr));

    const auto names = dec::block_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i].rfind("albedo.", 0) == 0) {
            const Tensor& g = tape.grad(ids[i]);
            for (double v : g.data) CHECK(v == 0.0);
        }
}

TEST_CASE("micro-batching reproduces the full-batch gradient") {
    auto f = make_fixture();
    f.cfg.mix = train::Mix::kParadigmOnly;

    auto run = [&](int micro) {
        auto st = train::init_state<double>(f.cfg, f.weights, f.arch, f.critic);
        st.cfg.micro_batch = micro;
        st.cfg.precision = "f64";
        const auto log = train::paradigm_step(st, {&f.albedo, &f.shading, nullptr}, 1.0);
        (void)log;
        return st;
    };
    const auto full = run(4);
    const auto chunked = run(2);
    CHECK(max_param_diff(full.model, chunked.model) < 1e-13);
}

TEST_CASE("training steps alternate and honor the log contract") {
    auto f = make_fixture();
    auto st = train::init_state<float>(f.cfg, f.weights, f.arch, f.critic);
    const train::TrainData data{&f.albedo, &f.shading, &f.real};

    std::ostringstream log;
    train::run_training(st, data, &log, "");
    CHECK(st.images_seen == f.cfg.total_images);
    CHECK(st.step == 4);

    std::vector<nlohmann::json> lines;
    std::istringstream in(log.str());
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0]["kind"] == "paradigm");
    CHECK(lines[1]["kind"] == "real");
    CHECK(lines[2]["kind"] == "paradigm");
    CHECK(lines[3]["kind"] == "real");
    CHECK(lines[3]["images_seen"] == 16);
    for (const auto& l : lines) CHECK(std::isfinite(l["loss"].get<double>()));
}

TEST_CASE("no-smoothing steps match an explicitly zeroed adversarial weight") {
    auto f = make_fixture();

    auto cfg_a = f.cfg;
    cfg_a.no_smoothing = true;
    auto st_a = train::init_state<float>(cfg_a, f.weights, f.arch, f.critic);

    auto weights_b = f.weights;
    weights_b.alpha_d = 0.0;
    auto st_b = train::init_state<float>(f.cfg, weights_b, f.arch, f.critic);

    const train::TrainData data{&f.albedo, &f.shading, &f.real};
    for (int i = 0; i < 2; ++i) {
        train::train_step(st_a, data);
        train::train_step(st_b, data);
    }
    CHECK(max_param_diff(st_a.model, st_b.model) == 0.0);
    // the critic is untouched when the adversarial term is off
    const auto fresh = disc::init_params<float>(f.critic, f.cfg.seed + 1);
    auto projected = fresh;
    disc::spectral_normalize(projected);
    CHECK(max_param_diff(st_a.critic, projected) == 0.0);
}

TEST_CASE("frozen critic leaves discriminator parameters unchanged") {
    auto f = make_fixture();
    f.cfg.freeze_disc = true;
    auto st = train::init_state<float>(f.cfg, f.weights, f.arch, f.critic);
    const auto before = st.critic;
    const train::TrainData data{&f.albedo, &f.shading, &f.real};
    train::train_step(st, data);  // paradigm
    train::train_step(st, data);  // real, with adversarial generator term
    CHECK(max_param_diff(st.critic, before) == 0.0);
}

TEST_CASE("ema shadow follows the configured cadence") {
    auto f = make_fixture();
    f.cfg.mix = train::Mix::kParadigmOnly;
    f.cfg.ema_interval = 2 * f.cfg.batch;  // one update every two steps
    auto st = train::init_state<float>(f.cfg, f.weights, f.arch, f.critic);
    const auto theta0 = st.model;
    const train::TrainData data{&f.albedo, &f.shading, nullptr};

    train::train_step(st, data);
    CHECK(max_param_diff(st.ema, theta0) == 0.0);  // not yet

    train::train_step(st, data);
    for (size_t i = 0; i < st.ema.blocks.size(); ++i)
        for (size_t e = 0; e < st.ema.blocks[i].size(); ++e) {
            const float expect = 0.9f * theta0.blocks[i].data[e] + 0.1f * st.model.blocks[i].data[e];
            CHECK(st.ema.blocks[i].data[e] == doctest::Approx(expect).epsilon(1e-6));
        }
}

TEST_CASE("checkpoint resume reproduces the run bit-exactly") {
    auto f = make_fixture();
    const train::TrainData data{&f.albedo, &f.shading, &f.real};

    auto straight = train::init_state<float>(f.cfg, f.weights, f.arch, f.critic);
    std::ostringstream log_a;
    for (int i = 0; i < 4; ++i) log_a << train::train_step(straight, data).to_json().dump() << "\n";

    auto resumed = train::init_state<float>(f.cfg, f.weights, f.arch, f.critic);
    std::ostringstream log_b;
    for (int i = 0; i < 2; ++i) log_b << train::train_step(resumed, data).to_json().dump() << "\n";

    const auto dir = (std::filesystem::temp_directory_path() / "iik_test_resume").string();
    std::filesystem::remove_all(dir);
    train::save_state(dir, resumed);
    CHECK(ckpt::precision(dir) == "f32");
    auto loaded = train::load_state_from(ckpt::load_f32(dir));
    std::filesystem::remove_all(dir);

    CHECK(loaded.step == 2);
    CHECK(loaded.images_seen == 8);
    for (int i = 0; i < 2; ++i) log_b << train::train_step(loaded, data).to_json().dump() << "\n";

    CHECK(log_a.str() == log_b.str());
    CHECK(max_param_diff(straight.model, loaded.model) == 0.0);
    CHECK(max_param_diff(straight.ema, loaded.ema) == 0.0);
    CHECK(max_param_diff(straight.critic, loaded.critic) == 0.0);
    CHECK(straight.model_opt.t == loaded.model_opt.t);
    for (size_t i = 0; i < straight.model_opt.m.size(); ++i) {
        CHECK(testutil::max_abs_diff(straight.model_opt.m[i], loaded.model_opt.m[i]) == 0.0);
        CHECK(testutil::max_abs_diff(straight.model_opt.v[i], loaded.model_opt.v[i]) == 0.0);
    }
}

TEST_CASE("composed generator losses pass the finite-difference check") {
    auto f = make_fixture();
    auto model = dec::init_params<double>(f.arch, 21);
    auto critic = disc::init_params<double>(f.critic, 22);
    disc::spectral_normalize(critic);
    Rng rng(23, 0);
    const auto batch = train::assemble_paradigm_batch<double>(f.albedo, f.shading, 2, rng);
    const auto real = train::assemble_real_batch<double>(f.real, 2, rng);
    train::LossWeights w;
    w.alpha_d = 0.7;

    // L_T + (L_R + alpha_d * adversarial), all through one tape
    auto build = [&](const dec::DecomposerParams<double>& p, ad::Tape<double>& tape, std::vector<int>* ids) {
        std::vector<int> ids_synth, ids_real;
        const dec::Heads hs =
            dec::forward(tape, p, tape.constant(dec::assemble_input(f.arch, batch.image)), &ids_synth, true);
        const Tensor ones({2}, 1.0);
        const int lt = train::synthetic_loss(tape, hs, batch, ones, ones, w, nullptr);

        const dec::Heads hr =
            dec::forward(tape, p, tape.constant(dec::assemble_input(f.arch, real)), &ids_real, true);
        const int lr = train::real_loss(tape, hr, real, w, false, nullptr);
        const int fg = disc::score_map(tape, critic, tape.concat_channels(hr.albedo, hr.shading));
        const int adv = disc::gen_adv_loss(tape, fg);
        if (ids) {
            *ids = ids_synth;
            ids->insert(ids->end(), ids_real.begin(), ids_real.end());
        }
        return tape.scalar_comb({lt, lr, adv}, {1.0, 1.0, w.alpha_d});
    };

    ad::Tape<double> tape;
    std::vector<int> ids;
    tape.backward(build(model, tape, &ids));
    const size_t nblocks = model.blocks.size();

    auto eval = [&](const dec::DecomposerParams<double>& p) {
        ad::Tape<double> t2;
        return t2.value(build(p, t2, nullptr)).data[0];
    };

    Rng pick(24, 0);
    const double h = 1e-5;
    for (size_t bi = 0; bi < nblocks; ++bi) {
        const size_t n = model.blocks[bi].size();
        for (size_t kk = 0; kk < std::min<size_t>(n, 4); ++kk) {
            const size_t e = n <= 4 ? kk : pick.uniform_int(n);
            const double analytic = tape.grad(ids[bi]).data[e] + tape.grad(ids[nblocks + bi]).data[e];
            const double keep = model.blocks[bi].data[e];
            model.blocks[bi].data[e] = keep + h;
            const double fp = eval(model);
            model.blocks[bi].data[e] = keep - h;
            const double fm = eval(model);
            model.blocks[bi].data[e] = keep;
            const double numeric = (fp - fm) / (2.0 * h);
            const double rel = std::abs(analytic - numeric) / std::max({1e-3, std::abs(analytic), std::abs(numeric)});
            INFO("block ", dec::block_names()[bi], " element ", e, " analytic ", analytic, " numeric ", numeric);
            CHECK(rel < 1e-4);
        }
    }
}

TEST_CASE("config round trips and weight variants") {
    auto f = make_fixture();
    f.cfg.ma01np = true;
    f.cfg.no_residual = true;
    f.cfg.mix = train::Mix::kParadigmOnly;
    const auto back = train::TrainConfig::from_json(f.cfg.to_json());
    CHECK(back.ma01np);
    CHECK(back.no_residual);
    CHECK(back.mix == train::Mix::kParadigmOnly);
    CHECK(back.batch == f.cfg.batch);
    CHECK(back.seed == f.cfg.seed);

    train::LossWeights w;
    w.alpha_d = 0.25;
    const auto wback = train::LossWeights::from_json(w.to_json());
    CHECK(wback.alpha_d == doctest::Approx(0.25));

    train::TrainConfig bad;
    bad.precision = "f16";
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    train::TrainConfig cfg2;
    cfg2.no_interp = true;
    const auto eff = train::effective_weights(w, cfg2);
    CHECK(eff.alpha_a == 0.0);
    CHECK(eff.alpha_s == 0.0);
    CHECK(eff.alpha_d == doctest::Approx(0.25));
}

TEST_CASE("held-out paradigm evaluation is deterministic and sane") {
    auto f = make_fixture();
    const auto zero = dec::zero_params<float>(f.arch);
    const auto s1 = train::eval_paradigm(zero, f.albedo, f.shading, 8, 5);
    const auto s2 = train::eval_paradigm(zero, f.albedo, f.shading, 8, 5);
    CHECK(s1.l_a == s2.l_a);
    CHECK(s1.residual_abs == s2.residual_abs);
    CHECK(s1.l_a > 0.0);
    CHECK(s1.l_a < 1.0);
    CHECK(s1.residual_abs > 0.0);
}
