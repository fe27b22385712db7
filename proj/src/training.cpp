#include "iik/training.hpp"

namespace iik::train {

void LossWeights::validate() const {
    for (double a : {alpha_a, alpha_s, alpha_c, alpha_r, alpha_rr, alpha_rc, alpha_d})
        if (!std::isfinite(a) || a < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
}

nlohmann::json LossWeights::to_json() const {
    return {{"alpha_a", alpha_a},   {"alpha_s", alpha_s},   {"alpha_c", alpha_c}, {"alpha_r", alpha_r},
            {"alpha_rr", alpha_rr}, {"alpha_rc", alpha_rc}, {"alpha_d", alpha_d}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
    LossWeights w;
    w.alpha_a = j.value("alpha_a", 1.0);
    w.alpha_s = j.value("alpha_s", 1.0);
    w.alpha_c = j.value("alpha_c", 1.0);
    w.alpha_r = j.value("alpha_r", 1.0);
    w.alpha_rr = j.value("alpha_rr", 1.0);
    w.alpha_rc = j.value("alpha_rc", 1.0);
    w.alpha_d = j.value("alpha_d", 1.0);
    w.validate();
    return w;
}

namespace {

const char* mix_name(Mix m) { return m == Mix::kParadigmOnly ? "paradigm_only" : "alternating"; }

Mix mix_from_name(const std::string& s) {
    if (s == "alternating") return Mix::kAlternating;
    if (s == "paradigm_only") return Mix::kParadigmOnly;
    throw ConfigError("unknown batch mix: " + s);
}

}  // namespace

void TrainConfig::validate() const {
    if (batch < 1) throw ConfigError("batch must be positive");
    if (micro_batch < 1) throw ConfigError("micro_batch must be positive");
    if (total_images < 0) throw ConfigError("total_images must be nonnegative");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("adam moment decays must lie in [0, 1)");
    if (adam_eps <= 0.0) throw ConfigError("adam epsilon must be positive");
    if (ema_w < 0.0 || ema_w > 1.0) throw ConfigError("ema decay must lie in [0, 1]");
    if (ema_interval < 1) throw ConfigError("ema interval must be positive");
    if (precision != "f32" && precision != "f64") throw ConfigError("precision must be f32 or f64");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"batch", batch},
            {"total_images", total_images},
            {"mix", mix_name(mix)},
            {"ma01np", ma01np},
            {"no_smoothing", no_smoothing},
            {"no_interp", no_interp},
            {"no_residual", no_residual},
            {"literal_range", literal_range},
            {"freeze_disc", freeze_disc},
            {"lr", lr},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"ema_w", ema_w},
            {"ema_interval", ema_interval},
            {"checkpoint_interval", checkpoint_interval},
            {"micro_batch", micro_batch},
            {"seed", seed},
            {"precision", precision}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch = j.value("batch", c.batch);
    c.total_images = j.value("total_images", c.total_images);
    c.mix = mix_from_name(j.value("mix", std::string(mix_name(c.mix))));
    c.ma01np = j.value("ma01np", c.ma01np);
    c.no_smoothing = j.value("no_smoothing", c.no_smoothing);
    c.no_interp = j.value("no_interp", c.no_interp);
    c.no_residual = j.value("no_residual", c.no_residual);
    c.literal_range = j.value("literal_range", c.literal_range);
    c.freeze_disc = j.value("freeze_disc", c.freeze_disc);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.ema_w = j.value("ema_w", c.ema_w);
    c.ema_interval = j.value("ema_interval", c.ema_interval);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.micro_batch = j.value("micro_batch", c.micro_batch);
    c.seed = j.value("seed", c.seed);
    c.precision = j.value("precision", c.precision);
    c.validate();
    return c;
}

LossWeights effective_weights(const LossWeights& w, const TrainConfig& cfg) {
    LossWeights e = w;
    if (cfg.no_smoothing) e.alpha_d = 0.0;
    if (cfg.no_interp) e.alpha_a = e.alpha_s = 0.0;
    if (cfg.no_residual) e.alpha_rr = 0.0;
    return e;
}

nlohmann::json StepLog::to_json() const {
    nlohmann::json j{{"step", step}, {"images_seen", images_seen}, {"kind", kind},
                     {"grad_norm", grad_norm}, {"lr", lr}};
    if (kind == "paradigm") {
        j["loss"] = synth.total;
        j["l_a"] = synth.l_a;
        j["l_s"] = synth.l_s;
        j["l_c"] = synth.l_c;
        j["l_r"] = synth.l_r;
    } else {
        j["loss"] = real.total;
        j["l_rr"] = real.l_rr;
        j["l_rc"] = real.l_rc;
        j["l_range"] = real.l_range;
        j["l_adv"] = real.l_adv;
        j["l_disc"] = loss_disc;
    }
    return j;
}

}  // namespace iik::train
