#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iik/autodiff.hpp"
#include "iik/checkpoint.hpp"
#include "iik/decomposer.hpp"
#include "iik/discriminator.hpp"
#include "iik/paradigm.hpp"
#include "iik/rng.hpp"
#include "iik/tensor.hpp"

// The training loop.  Steps alternate between full paradigm batches
// (supervised loss L_T against the sampled albedo/shading/color) and full
// real batches (reconstruction + range + color prior L_R, preceded by a
// discriminator update on fresh paradigm pairs vs. the current
// decompositions, with the adversarial term fed back through the frozen,
// just-updated discriminator).
//
// Batches run through the tape in micro-batches; every loss is a batch
// mean, so chunk gradients accumulate with weight chunk/batch and the
// result is bit-identical to a single full-batch tape.  Batch assembly is
// keyed by (seed, step index), which makes every step reproducible and
// resumable.

namespace iik::train {

struct LossWeights {
    double alpha_a = 1.0;   // albedo vs paradigm albedo
    double alpha_s = 1.0;   // shading vs paradigm shading
    double alpha_c = 1.0;   // color vs paradigm color
    double alpha_r = 1.0;   // render vs paradigm image
    double alpha_rr = 1.0;  // render vs real image
    double alpha_rc = 1.0;  // real color vs (1,1,1)
    double alpha_d = 1.0;   // adversarial generator term

    void validate() const;
    nlohmann::json to_json() const;
    static LossWeights from_json(const nlohmann::json& j);
};

enum class Mix { kAlternating, kParadigmOnly };

struct TrainConfig {
    int batch = 128;
    long total_images = 200000;  // desk-scale default; the reference regime is 32M
    Mix mix = Mix::kAlternating;

    // variant switches; they act by zeroing the corresponding weights
    bool ma01np = false;        // per example, train albedo or shading but not both
    bool no_smoothing = false;  // alpha_d = 0
    bool no_interp = false;     // alpha_a = alpha_s = 0
    bool no_residual = false;   // alpha_rr = 0
    bool literal_range = false;
    bool freeze_disc = false;

    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    double ema_w = 0.9;
    long ema_interval = 5000;          // images between shadow updates
    long checkpoint_interval = 50000;  // images between saved checkpoints
    int micro_batch = 16;
    uint64_t seed = 0;
    std::string precision = "f32";  // f32 | f64

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// variant flags folded into the weights actually used by the step
LossWeights effective_weights(const LossWeights& w, const TrainConfig& cfg);

struct TrainData {
    const paradigm::TileDictionary* albedo = nullptr;
    const paradigm::TileDictionary* shading = nullptr;
    const paradigm::TileDictionary* real = nullptr;
};

template <typename T>
struct Batch {
    TensorT<T> albedo;   // (N,3,t,t)
    TensorT<T> shading;  // (N,1,t,t)
    TensorT<T> color;    // (N,3)
    TensorT<T> image;    // (N,3,t,t) = albedo * (shading x color)
};

// Draw order per example: albedo tile, shading tile, color; the image is
// composed from the draws so the loss targets are mutually consistent.
template <typename T>
Batch<T> assemble_paradigm_batch(const paradigm::TileDictionary& albedo,
                                 const paradigm::TileDictionary& shading, int n, Rng& rng) {
    if (albedo.tile != shading.tile) throw ConfigError("albedo/shading dictionaries disagree on tile");
    const int t = albedo.tile;
    Batch<T> b{TensorT<T>({n, 3, t, t}), TensorT<T>({n, 1, t, t}), TensorT<T>({n, 3}),
               TensorT<T>({n, 3, t, t})};
    const size_t plane = static_cast<size_t>(t) * t;
    for (int i = 0; i < n; ++i) {
        const Tensor32& a = albedo.draw(rng);
        const Tensor32& s = shading.draw(rng);
        const field::Color c = paradigm::sample_color(rng);
        T* ab = b.albedo.ptr() + static_cast<size_t>(i) * 3 * plane;
        T* sb = b.shading.ptr() + static_cast<size_t>(i) * plane;
        T* ib = b.image.ptr() + static_cast<size_t>(i) * 3 * plane;
        for (size_t e = 0; e < 3 * plane; ++e) ab[e] = static_cast<T>(a.data[e]);
        for (size_t e = 0; e < plane; ++e) sb[e] = static_cast<T>(s.data[e]);
        for (int ch = 0; ch < 3; ++ch) {
            b.color.data[static_cast<size_t>(i) * 3 + ch] = static_cast<T>(c[ch]);
            const T cc = static_cast<T>(c[ch]);
            for (size_t e = 0; e < plane; ++e)
                ib[static_cast<size_t>(ch) * plane + e] = ab[static_cast<size_t>(ch) * plane + e] * sb[e] * cc;
        }
    }
    return b;
}

template <typename T>
TensorT<T> assemble_real_batch(const paradigm::TileDictionary& real, int n, Rng& rng) {
    const int t = real.tile;
    TensorT<T> out({n, 3, t, t});
    const size_t ex = static_cast<size_t>(3) * t * t;
    for (int i = 0; i < n; ++i) {
        const Tensor32& tile = real.draw(rng);
        for (size_t e = 0; e < ex; ++e) out.data[static_cast<size_t>(i) * ex + e] = static_cast<T>(tile.data[e]);
    }
    return out;
}

struct SyntheticParts {
    double l_a = 0, l_s = 0, l_c = 0, l_r = 0, total = 0;
};

// L_T on one chunk: alpha_a C(a,a^) + alpha_s C(s,s^) + alpha_c |c-c^|^2 +
// alpha_r C(render, image), all batch means; masks are per-example 0/1
// gates on the albedo/shading terms.
template <typename T>
int synthetic_loss(ad::Tape<T>& tape, const dec::Heads& h, const Batch<T>& b,
                   const TensorT<T>& mask_a, const TensorT<T>& mask_s, const LossWeights& w,
                   SyntheticParts* parts = nullptr) {
    const int n = b.albedo.shape[0];
    const TensorT<T> ones({n}, T(1));
    const int la = tape.dot_mean(tape.huber_per_example(h.albedo, b.albedo, T(1)), mask_a);
    const int ls = tape.dot_mean(tape.huber_per_example(h.shading, b.shading, T(1)), mask_s);
    const int lc = tape.dot_mean(tape.sqerr_sum_per_example(h.color, b.color), ones);
    const int render = tape.compose_render(h.albedo, h.shading, h.color);
    const int lr = tape.dot_mean(tape.huber_per_example(render, b.image, T(1)), ones);
    const int total = tape.scalar_comb(
        {la, ls, lc, lr},
        {static_cast<T>(w.alpha_a), static_cast<T>(w.alpha_s), static_cast<T>(w.alpha_c), static_cast<T>(w.alpha_r)});
    if (parts) {
        parts->l_a = static_cast<double>(tape.value(la).data[0]);
        parts->l_s = static_cast<double>(tape.value(ls).data[0]);
        parts->l_c = static_cast<double>(tape.value(lc).data[0]);
        parts->l_r = static_cast<double>(tape.value(lr).data[0]);
        parts->total = static_cast<double>(tape.value(total).data[0]);
    }
    return total;
}

struct RealParts {
    double l_rr = 0, l_rc = 0, l_range = 0, l_adv = 0, total = 0;
};

// L_R on one chunk: alpha_rr C(render, image) + alpha_rc |c-1|^2 + range
// penalties on albedo and shading.  The adversarial term is appended by
// the caller (it needs the discriminator).
template <typename T>
int real_loss(ad::Tape<T>& tape, const dec::Heads& h, const TensorT<T>& image, const LossWeights& w,
              bool literal_range, RealParts* parts = nullptr) {
    const int n = image.shape[0];
    const TensorT<T> ones({n}, T(1));
    const TensorT<T> white({n, 3}, T(1));
    const int render = tape.compose_render(h.albedo, h.shading, h.color);
    const int lrr = tape.dot_mean(tape.huber_per_example(render, image, T(1)), ones);
    const int lrc = tape.dot_mean(tape.sqerr_sum_per_example(h.color, white), ones);
    const int ra = tape.dot_mean(tape.range_per_example(h.albedo, literal_range), ones);
    const int rs = tape.dot_mean(tape.range_per_example(h.shading, literal_range), ones);
    const int total = tape.scalar_comb(
        {lrr, lrc, ra, rs}, {static_cast<T>(w.alpha_rr), static_cast<T>(w.alpha_rc), T(1), T(1)});
    if (parts) {
        parts->l_rr = static_cast<double>(tape.value(lrr).data[0]);
        parts->l_rc = static_cast<double>(tape.value(lrc).data[0]);
        parts->l_range = static_cast<double>(tape.value(ra).data[0]) + static_cast<double>(tape.value(rs).data[0]);
        parts->total = static_cast<double>(tape.value(total).data[0]);
    }
    return total;
}

// Adam with decaying first/second moment averages and bias correction.
template <typename T>
struct AdamState {
    std::vector<TensorT<T>> m, v;
    long t = 0;
};

template <typename T>
AdamState<T> init_adam(const std::vector<TensorT<T>>& blocks) {
    AdamState<T> st;
    st.m.reserve(blocks.size());
    st.v.reserve(blocks.size());
    for (const auto& b : blocks) {
        st.m.emplace_back(b.shape);
        st.v.emplace_back(b.shape);
    }
    return st;
}

template <typename T>
void adam_step(std::vector<TensorT<T>>& blocks, const std::vector<TensorT<T>>& grads, AdamState<T>& st,
               double lr, double beta1, double beta2, double eps) {
    if (blocks.size() != grads.size() || blocks.size() != st.m.size())
        throw ConfigError("adam: mismatched block lists");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
    for (size_t i = 0; i < blocks.size(); ++i) {
        auto& th = blocks[i];
        const auto& g = grads[i];
        auto& m = st.m[i];
        auto& v = st.v[i];
        if (!th.same_shape(g)) throw ConfigError("adam: gradient shape mismatch");
        for (size_t e = 0; e < th.size(); ++e) {
            const double ge = static_cast<double>(g.data[e]);
            const double me = beta1 * static_cast<double>(m.data[e]) + (1.0 - beta1) * ge;
            const double ve = beta2 * static_cast<double>(v.data[e]) + (1.0 - beta2) * ge * ge;
            m.data[e] = static_cast<T>(me);
            v.data[e] = static_cast<T>(ve);
            th.data[e] -= static_cast<T>(lr * (me / bc1) / (std::sqrt(ve / bc2) + eps));
        }
    }
}

template <typename T>
std::vector<TensorT<T>> zero_like(const std::vector<TensorT<T>>& blocks) {
    std::vector<TensorT<T>> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.emplace_back(b.shape);
    return out;
}

// out[i] += scale * grad(ids[i]); ids may contain -1 (non-trainable state)
template <typename T>
void accumulate_grads(ad::Tape<T>& tape, const std::vector<int>& ids, T scale,
                      std::vector<TensorT<T>>& out) {
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0) continue;
        const TensorT<T>& g = tape.grad(ids[i]);
        for (size_t e = 0; e < out[i].size(); ++e) out[i].data[e] += scale * g.data[e];
    }
}

template <typename T>
double grad_norm(const std::vector<TensorT<T>>& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (const T v : g.data) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
}

template <typename T>
bool all_finite(const std::vector<TensorT<T>>& grads) {
    for (const auto& g : grads)
        for (const T v : g.data)
            if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

struct StepLog {
    long step = 0;
    long images_seen = 0;
    std::string kind;  // "paradigm" | "real"
    SyntheticParts synth;
    RealParts real;
    double loss_disc = 0.0;
    double grad_norm = 0.0;
    double lr = 0.0;

    nlohmann::json to_json() const;
};

template <typename T>
struct TrainState {
    TrainConfig cfg;
    LossWeights weights;
    dec::DecomposerParams<T> model;
    dec::DecomposerParams<T> ema;
    disc::DiscriminatorParams<T> critic;
    AdamState<T> model_opt;
    AdamState<T> critic_opt;
    long step = 0;
    long images_seen = 0;
    long next_ema = 0;
};

template <typename T>
TrainState<T> init_state(const TrainConfig& cfg, const LossWeights& weights,
                         const dec::DecomposerConfig& arch, const disc::DiscriminatorConfig& disc_arch) {
    cfg.validate();
    weights.validate();
    TrainState<T> st;
    st.cfg = cfg;
    st.weights = weights;
    st.model = dec::init_params<T>(arch, cfg.seed);
    st.ema = st.model;
    st.critic = disc::init_params<T>(disc_arch, cfg.seed + 1);
    disc::spectral_normalize(st.critic);  // score with projected kernels from the start
    st.model_opt = init_adam(st.model.blocks);
    st.critic_opt = init_adam(st.critic.blocks);
    st.next_ema = cfg.ema_interval;
    return st;
}

namespace detail {

// chunk views of batch-major tensors: examples [lo, hi)
template <typename T>
TensorT<T> slice_examples(const TensorT<T>& t, int lo, int hi) {
    std::vector<int> shape = t.shape;
    shape[0] = hi - lo;
    TensorT<T> out(shape);
    const size_t ex = t.size() / static_cast<size_t>(t.shape[0]);
    std::copy(t.ptr() + lo * ex, t.ptr() + hi * ex, out.ptr());
    return out;
}

template <typename T>
Batch<T> slice_batch(const Batch<T>& b, int lo, int hi) {
    return {slice_examples(b.albedo, lo, hi), slice_examples(b.shading, lo, hi),
            slice_examples(b.color, lo, hi), slice_examples(b.image, lo, hi)};
}

}  // namespace detail

// One paradigm step: L_T gradients accumulated over micro-batches, one
// Adam update.  Returns the per-component losses for the log.
template <typename T>
StepLog paradigm_step(TrainState<T>& st, const TrainData& data, double lr_scale) {
    if (!data.albedo || !data.shading) throw ConfigError("paradigm step needs albedo and shading dictionaries");
    const int n = st.cfg.batch;
    Rng rng(st.cfg.seed, streams::sub(streams::kTrainBatch, static_cast<uint64_t>(st.step)));
    const Batch<T> batch = assemble_paradigm_batch<T>(*data.albedo, *data.shading, n, rng);
    TensorT<T> mask_a({n}, T(1)), mask_s({n}, T(1));
    if (st.cfg.ma01np)
        for (int i = 0; i < n; ++i) {
            const bool albedo_on = rng.coin();
            mask_a.data[i] = albedo_on ? T(1) : T(0);
            mask_s.data[i] = albedo_on ? T(0) : T(1);
        }

    const LossWeights w = effective_weights(st.weights, st.cfg);
    auto grads = zero_like(st.model.blocks);
    StepLog log;
    for (int lo = 0; lo < n; lo += st.cfg.micro_batch) {
        const int hi = std::min(n, lo + st.cfg.micro_batch);
        const T scale = static_cast<T>(hi - lo) / static_cast<T>(n);
        const Batch<T> chunk = detail::slice_batch(batch, lo, hi);
        ad::Tape<T> tape;
        std::vector<int> ids;
        const dec::Heads h =
            dec::forward(tape, st.model, tape.constant(dec::assemble_input(st.model.cfg, chunk.image)), &ids, true);
        SyntheticParts parts;
        const int loss = synthetic_loss(tape, h, chunk, detail::slice_examples(mask_a, lo, hi),
                                        detail::slice_examples(mask_s, lo, hi), w, &parts);
        tape.backward(loss);
        accumulate_grads(tape, ids, scale, grads);
        const double ds = static_cast<double>(scale);
        log.synth.l_a += ds * parts.l_a;
        log.synth.l_s += ds * parts.l_s;
        log.synth.l_c += ds * parts.l_c;
        log.synth.l_r += ds * parts.l_r;
        log.synth.total += ds * parts.total;
    }
    if (!all_finite(grads)) throw NumericError("non-finite gradient in paradigm step");
    log.grad_norm = grad_norm(grads);
    adam_step(st.model.blocks, grads, st.model_opt, st.cfg.lr * lr_scale, st.cfg.beta1, st.cfg.beta2,
              st.cfg.adam_eps);
    log.kind = "paradigm";
    return log;
}

// One real step: discriminator update on (fresh paradigm pairs, current
// decompositions), then a generator update on L_R plus the adversarial
// term through the frozen updated discriminator.
template <typename T>
StepLog real_step(TrainState<T>& st, const TrainData& data, double lr_scale) {
    if (!data.real) throw ConfigError("real step needs a real-tile dictionary");
    const int n = st.cfg.batch;
    const int tile = st.model.cfg.tile;
    const LossWeights w = effective_weights(st.weights, st.cfg);
    const bool adversarial = w.alpha_d > 0.0;
    if (adversarial && (!data.albedo || !data.shading))
        throw ConfigError("adversarial step needs paradigm dictionaries");

    Rng rng(st.cfg.seed, streams::sub(streams::kTrainBatch, static_cast<uint64_t>(st.step)));
    const TensorT<T> real = assemble_real_batch<T>(*data.real, n, rng);
    StepLog log;
    log.kind = "real";

    if (adversarial && !st.cfg.freeze_disc) {
        const Batch<T> fresh = assemble_paradigm_batch<T>(*data.albedo, *data.shading, n, rng);
        // current decompositions of the real batch, values only
        TensorT<T> gen_pairs({n, 4, tile, tile});
        const size_t plane = static_cast<size_t>(tile) * tile;
        for (int lo = 0; lo < n; lo += st.cfg.micro_batch) {
            const int hi = std::min(n, lo + st.cfg.micro_batch);
            TensorT<T> albedo, shading, color;
            dec::decompose_tiles(st.model, detail::slice_examples(real, lo, hi), albedo, shading, color);
            for (int i = lo; i < hi; ++i) {
                std::copy(albedo.ptr() + static_cast<size_t>(i - lo) * 3 * plane,
                          albedo.ptr() + static_cast<size_t>(i - lo + 1) * 3 * plane,
                          gen_pairs.ptr() + static_cast<size_t>(i) * 4 * plane);
                std::copy(shading.ptr() + static_cast<size_t>(i - lo) * plane,
                          shading.ptr() + static_cast<size_t>(i - lo + 1) * plane,
                          gen_pairs.ptr() + (static_cast<size_t>(i) * 4 + 3) * plane);
            }
        }
        TensorT<T> par_pairs({n, 4, tile, tile});
        for (int i = 0; i < n; ++i) {
            std::copy(fresh.albedo.ptr() + static_cast<size_t>(i) * 3 * plane,
                      fresh.albedo.ptr() + static_cast<size_t>(i + 1) * 3 * plane,
                      par_pairs.ptr() + static_cast<size_t>(i) * 4 * plane);
            std::copy(fresh.shading.ptr() + static_cast<size_t>(i) * plane,
                      fresh.shading.ptr() + static_cast<size_t>(i + 1) * plane,
                      par_pairs.ptr() + (static_cast<size_t>(i) * 4 + 3) * plane);
        }

        auto dgrads = zero_like(st.critic.blocks);
        for (int lo = 0; lo < n; lo += st.cfg.micro_batch) {
            const int hi = std::min(n, lo + st.cfg.micro_batch);
            const T scale = static_cast<T>(hi - lo) / static_cast<T>(n);
            ad::Tape<T> tape;
            std::vector<int> ids_par, ids_gen;
            const int fp =
                disc::score_map(tape, st.critic, tape.constant(detail::slice_examples(par_pairs, lo, hi)),
                                &ids_par, true);
            const int fg =
                disc::score_map(tape, st.critic, tape.constant(detail::slice_examples(gen_pairs, lo, hi)),
                                &ids_gen, true);
            const int loss = disc::disc_loss(tape, fp, fg, st.critic.cfg.hinge);
            tape.backward(loss);
            accumulate_grads(tape, ids_par, scale, dgrads);
            accumulate_grads(tape, ids_gen, scale, dgrads);
            log.loss_disc += static_cast<double>(scale) * static_cast<double>(tape.value(loss).data[0]);
        }
        if (!all_finite(dgrads)) throw NumericError("non-finite gradient in discriminator step");
        adam_step(st.critic.blocks, dgrads, st.critic_opt, st.cfg.lr * lr_scale, st.cfg.beta1, st.cfg.beta2,
                  st.cfg.adam_eps);
        disc::spectral_normalize(st.critic);
    }

    // generator update through the (frozen) updated discriminator
    auto grads = zero_like(st.model.blocks);
    for (int lo = 0; lo < n; lo += st.cfg.micro_batch) {
        const int hi = std::min(n, lo + st.cfg.micro_batch);
        const T scale = static_cast<T>(hi - lo) / static_cast<T>(n);
        const TensorT<T> chunk = detail::slice_examples(real, lo, hi);
        ad::Tape<T> tape;
        std::vector<int> ids;
        const dec::Heads h =
            dec::forward(tape, st.model, tape.constant(dec::assemble_input(st.model.cfg, chunk)), &ids, true);
        RealParts parts;
        int loss = real_loss(tape, h, chunk, w, st.cfg.literal_range, &parts);
        if (adversarial) {
            const int pair = tape.concat_channels(h.albedo, h.shading);
            const int fg = disc::score_map(tape, st.critic, pair);
            const int adv = disc::gen_adv_loss(tape, fg, st.critic.cfg.hinge);
            parts.l_adv = static_cast<double>(tape.value(adv).data[0]);
            loss = tape.scalar_comb({loss, adv}, {T(1), static_cast<T>(w.alpha_d)});
            parts.total = static_cast<double>(tape.value(loss).data[0]);
        }
        tape.backward(loss);
        accumulate_grads(tape, ids, scale, grads);
        const double ds = static_cast<double>(scale);
        log.real.l_rr += ds * parts.l_rr;
        log.real.l_rc += ds * parts.l_rc;
        log.real.l_range += ds * parts.l_range;
        log.real.l_adv += ds * parts.l_adv;
        log.real.total += ds * parts.total;
    }
    if (!all_finite(grads)) throw NumericError("non-finite gradient in real step");
    log.grad_norm = grad_norm(grads);
    adam_step(st.model.blocks, grads, st.model_opt, st.cfg.lr * lr_scale, st.cfg.beta1, st.cfg.beta2,
              st.cfg.adam_eps);
    return log;
}

// One full training step with the non-finite retry policy: on a numeric
// failure the state is rolled back and the update retried once at half
// step size; a second failure propagates.  Advances the EMA shadow
// whenever an interval boundary is crossed.
template <typename T>
StepLog train_step(TrainState<T>& st, const TrainData& data) {
    const bool real = st.cfg.mix == Mix::kAlternating && (st.step % 2 == 1);
    StepLog log;
    TrainState<T> backup = st;  // a failed real step may already have moved the critic
    try {
        log = real ? real_step(st, data, 1.0) : paradigm_step(st, data, 1.0);
        log.lr = st.cfg.lr;
    } catch (const NumericError&) {
        st = std::move(backup);
        std::fprintf(stderr, "step %ld: non-finite gradient, retrying at half step size\n", st.step);
        log = real ? real_step(st, data, 0.5) : paradigm_step(st, data, 0.5);
        log.lr = st.cfg.lr * 0.5;
    }
    st.step += 1;
    st.images_seen += st.cfg.batch;
    log.step = st.step;
    log.images_seen = st.images_seen;
    while (st.images_seen >= st.next_ema) {
        dec::ema_update(st.ema, st.model, static_cast<T>(st.cfg.ema_w));
        st.next_ema += st.cfg.ema_interval;
    }
    return log;
}

// Checkpoints hold everything a resumed run needs to continue bit-exactly:
// live and EMA decomposer blocks, discriminator blocks (with the spectral
// power-iteration vectors), and both optimizers' moments.
template <typename T>
void save_state(const std::string& dir, const TrainState<T>& st) {
    ckpt::Archive<T> a;
    a.meta["kind"] = "train-state";
    a.meta["train"] = st.cfg.to_json();
    a.meta["weights"] = st.weights.to_json();
    a.meta["arch"] = st.model.cfg.to_json();
    a.meta["disc"] = st.critic.cfg.to_json();
    a.meta["step"] = st.step;
    a.meta["images_seen"] = st.images_seen;
    a.meta["next_ema"] = st.next_ema;
    a.meta["adam_t_model"] = st.model_opt.t;
    a.meta["adam_t_critic"] = st.critic_opt.t;
    dec::add_blocks(a, "model.", st.model);
    dec::add_blocks(a, "ema.", st.ema);
    disc::add_blocks(a, "critic.", st.critic);
    const auto mnames = dec::block_names();
    for (size_t i = 0; i < mnames.size(); ++i) {
        a.add("opt.model.m." + mnames[i], st.model_opt.m[i]);
        a.add("opt.model.v." + mnames[i], st.model_opt.v[i]);
    }
    const auto dnames = disc::block_names(st.critic.cfg);
    for (size_t i = 0; i < dnames.size(); ++i) {
        a.add("opt.critic.m." + dnames[i], st.critic_opt.m[i]);
        a.add("opt.critic.v." + dnames[i], st.critic_opt.v[i]);
    }
    ckpt::save(dir, a);
}

template <typename T>
TrainState<T> load_state_from(const ckpt::Archive<T>& a) {
    if (!a.meta.contains("kind") || a.meta.at("kind") != "train-state")
        throw IoError("checkpoint is not a training state");
    TrainState<T> st;
    st.cfg = TrainConfig::from_json(a.meta.at("train"));
    st.weights = LossWeights::from_json(a.meta.at("weights"));
    const auto arch = dec::DecomposerConfig::from_json(a.meta.at("arch"));
    const auto darch = disc::DiscriminatorConfig::from_json(a.meta.at("disc"));
    st.model = dec::from_archive(a, "model.", arch);
    st.ema = dec::from_archive(a, "ema.", arch);
    st.critic = disc::from_archive(a, "critic.", darch);
    st.step = a.meta.at("step").template get<long>();
    st.images_seen = a.meta.at("images_seen").template get<long>();
    st.next_ema = a.meta.at("next_ema").template get<long>();
    st.model_opt = init_adam(st.model.blocks);
    st.critic_opt = init_adam(st.critic.blocks);
    st.model_opt.t = a.meta.at("adam_t_model").template get<long>();
    st.critic_opt.t = a.meta.at("adam_t_critic").template get<long>();
    const auto mnames = dec::block_names();
    for (size_t i = 0; i < mnames.size(); ++i) {
        const TensorT<T>* m = a.find("opt.model.m." + mnames[i]);
        const TensorT<T>* v = a.find("opt.model.v." + mnames[i]);
        if (!m || !v) throw IoError("checkpoint is missing optimizer moments for " + mnames[i]);
        st.model_opt.m[i] = *m;
        st.model_opt.v[i] = *v;
    }
    const auto dnames = disc::block_names(st.critic.cfg);
    for (size_t i = 0; i < dnames.size(); ++i) {
        const TensorT<T>* m = a.find("opt.critic.m." + dnames[i]);
        const TensorT<T>* v = a.find("opt.critic.v." + dnames[i]);
        if (!m || !v) throw IoError("checkpoint is missing optimizer moments for " + dnames[i]);
        st.critic_opt.m[i] = *m;
        st.critic_opt.v[i] = *v;
    }
    return st;
}

// Runs until total_images, appending one JSON line per step to `log` and
// saving periodic checkpoints under `ckpt_dir` (empty = none).
template <typename T>
void run_training(TrainState<T>& st, const TrainData& data, std::ostream* log,
                  const std::string& ckpt_dir) {
    long next_ckpt = st.cfg.checkpoint_interval > 0
                         ? (st.images_seen / st.cfg.checkpoint_interval + 1) * st.cfg.checkpoint_interval
                         : -1;
    while (st.images_seen < st.cfg.total_images) {
        const StepLog line = train_step(st, data);
        if (log) *log << line.to_json().dump() << "\n";
        if (!ckpt_dir.empty() && next_ckpt > 0 && st.images_seen >= next_ckpt) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_%09ld", st.images_seen);
            save_state(ckpt_dir + "/" + name, st);
            next_ckpt += st.cfg.checkpoint_interval;
        }
    }
    if (log) log->flush();
}

struct EvalStats {
    double l_a = 0;            // mean Huber against held-out paradigm albedo
    double l_s = 0;            // same for shading
    double residual_abs = 0;   // mean |image - render|
};

// Value-only evaluation on n held-out paradigm examples, deterministic in
// the seed; used to track training progress without touching the tape.
template <typename T>
EvalStats eval_paradigm(const dec::DecomposerParams<T>& model, const paradigm::TileDictionary& albedo,
                        const paradigm::TileDictionary& shading, int n, uint64_t seed, int chunk = 16) {
    Rng rng(seed, streams::kEval);
    const Batch<T> batch = assemble_paradigm_batch<T>(albedo, shading, n, rng);
    EvalStats stats;
    for (int lo = 0; lo < n; lo += chunk) {
        const int hi = std::min(n, lo + chunk);
        const Batch<T> c = detail::slice_batch(batch, lo, hi);
        TensorT<T> a, s, col;
        dec::decompose_tiles(model, c.image, a, s, col);
        const double scale = static_cast<double>(hi - lo) / static_cast<double>(n);
        double ha = 0.0, hs = 0.0;
        for (size_t e = 0; e < a.size(); ++e) {
            const double d = static_cast<double>(a.data[e]) - static_cast<double>(c.albedo.data[e]);
            ha += std::abs(d) <= 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
        }
        for (size_t e = 0; e < s.size(); ++e) {
            const double d = static_cast<double>(s.data[e]) - static_cast<double>(c.shading.data[e]);
            hs += std::abs(d) <= 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
        }
        stats.l_a += scale * ha / static_cast<double>(a.size());
        stats.l_s += scale * hs / static_cast<double>(s.size());

        const int t = model.cfg.tile;
        const size_t plane = static_cast<size_t>(t) * t;
        double res = 0.0;
        for (int i = 0; i < hi - lo; ++i)
            for (int ch = 0; ch < 3; ++ch) {
                const double cc = static_cast<double>(col.data[static_cast<size_t>(i) * 3 + ch]);
                for (size_t e = 0; e < plane; ++e) {
                    const size_t off = (static_cast<size_t>(i) * 3 + ch) * plane + e;
                    const double render = static_cast<double>(a.data[off]) * cc *
                                          static_cast<double>(s.data[static_cast<size_t>(i) * plane + e]);
                    res += std::abs(static_cast<double>(c.image.data[off]) - render);
                }
            }
        stats.residual_abs += scale * res / static_cast<double>(a.size());
    }
    return stats;
}

}  // namespace iik::train
