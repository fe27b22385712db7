#include "iik/presets.hpp"

#include <algorithm>

#include "iik/common.hpp"

namespace iik::presets {

const char* data_source_name(DataSource s) {
    switch (s) {
        case DataSource::kParadigm: return "paradigm";
        case DataSource::kRealTiles: return "real_tiles";
        case DataSource::kRealTilesPaired: return "real_tiles_paired";
    }
    throw ConfigError("unknown data source");
}

DataSource data_source_from_name(const std::string& name) {
    if (name == "paradigm") return DataSource::kParadigm;
    if (name == "real_tiles") return DataSource::kRealTiles;
    if (name == "real_tiles_paired") return DataSource::kRealTilesPaired;
    throw ConfigError("unknown data source: " + name);
}

void Experiment::validate() const {
    if (name.empty()) throw ConfigError("experiment name must not be empty");
    if (ingest_short_edge < 0) throw ConfigError("ingest_short_edge must be >= 0");
    if (checkpoint_average < 1) throw ConfigError("checkpoint_average must be positive");
    paradigm.validate();
    decomposer.validate();
    critic.validate();
    weights.validate();
    training.validate();
    averaging.validate();
    if (paradigm.tile != decomposer.tile)
        throw ConfigError("paradigm and decomposer tile sizes disagree");
    if (averaging.use_location_code != decomposer.location_code)
        throw ConfigError("averaging and decomposer disagree on the location code");
}

nlohmann::json Experiment::to_json() const {
    return {{"name", name},
            {"source", data_source_name(source)},
            {"ingest_short_edge", ingest_short_edge},
            {"paradigm", {{"tile", paradigm.tile},
                          {"d_max", paradigm.d_max},
                          {"p_min", paradigm.p_min},
                          {"n_m", paradigm.n_m},
                          {"s_min", paradigm.s_min},
                          {"s_max", paradigm.s_max},
                          {"dict_size", paradigm.dict_size}}},
            {"decomposer", decomposer.to_json()},
            {"critic", critic.to_json()},
            {"weights", weights.to_json()},
            {"training", training.to_json()},
            {"averaging", averaging.to_json()},
            {"use_ema", use_ema},
            {"checkpoint_average", checkpoint_average}};
}

Experiment Experiment::from_json(const nlohmann::json& j) {
    Experiment e = experiment_preset(j.at("name").get<std::string>());
    e.source = data_source_from_name(j.value("source", std::string(data_source_name(e.source))));
    e.ingest_short_edge = j.value("ingest_short_edge", e.ingest_short_edge);
    if (j.contains("paradigm")) {
        const auto& p = j["paradigm"];
        e.paradigm.tile = p.value("tile", e.paradigm.tile);
        e.paradigm.d_max = p.value("d_max", e.paradigm.d_max);
        e.paradigm.p_min = p.value("p_min", e.paradigm.p_min);
        e.paradigm.n_m = p.value("n_m", e.paradigm.n_m);
        e.paradigm.s_min = p.value("s_min", e.paradigm.s_min);
        e.paradigm.s_max = p.value("s_max", e.paradigm.s_max);
        e.paradigm.dict_size = p.value("dict_size", e.paradigm.dict_size);
    }
    if (j.contains("decomposer")) e.decomposer = dec::DecomposerConfig::from_json(j["decomposer"]);
    if (j.contains("critic")) e.critic = disc::DiscriminatorConfig::from_json(j["critic"]);
    if (j.contains("weights")) e.weights = train::LossWeights::from_json(j["weights"]);
    if (j.contains("training")) e.training = train::TrainConfig::from_json(j["training"]);
    if (j.contains("averaging")) e.averaging = infer::AveragingConfig::from_json(j["averaging"]);
    e.use_ema = j.value("use_ema", e.use_ema);
    e.checkpoint_average = j.value("checkpoint_average", e.checkpoint_average);
    e.validate();
    return e;
}

namespace {

Experiment make_base() {
    Experiment e;
    e.name = "base";
    e.critic = disc::DiscriminatorConfig::preset(22);
    e.training.ma01np = false;
    e.training.ema_w = 0.0;  // shadow tracks the live parameters
    e.use_ema = false;
    e.checkpoint_average = 3;
    e.averaging = infer::averaging_preset("base");
    return e;
}

Experiment make_ma01np() {
    Experiment e = make_base();
    e.name = "ma01np";
    e.training.ma01np = true;
    e.training.ema_w = 0.9;
    e.use_ema = true;
    e.checkpoint_average = 1;
    return e;
}

// bbaf is the reference point for the ablations below
Experiment make_bbaf() {
    Experiment e = make_ma01np();
    e.name = "bbaf";
    e.averaging = infer::averaging_preset("bbaf");
    return e;
}

}  // namespace

Experiment experiment_preset(const std::string& key) {
    if (key == "base") return make_base();
    if (key == "ma01np") return make_ma01np();
    if (key == "bba" || key == "bbap" || key == "bbat") {
        Experiment e = make_ma01np();
        e.name = key;
        e.averaging = infer::averaging_preset(key);
        return e;
    }
    if (key == "np") {
        Experiment e = make_ma01np();
        e.name = "np";
        e.decomposer.location_code = false;
        e.averaging = infer::averaging_preset("np");
        return e;
    }
    if (key == "bbaf") return make_bbaf();
    if (key == "nosmo") {
        Experiment e = make_bbaf();
        e.name = "nosmo";
        e.training.no_smoothing = true;
        return e;
    }
    if (key == "noint") {
        Experiment e = make_bbaf();
        e.name = "noint";
        e.training.no_interp = true;
        return e;
    }
    if (key == "nores") {
        Experiment e = make_bbaf();
        e.name = "nores";
        e.training.no_residual = true;
        return e;
    }
    if (key == "sd" || key == "id" || key == "md" || key == "bd") {
        Experiment e = make_bbaf();
        e.name = key;
        const int rd = key == "sd" ? 10 : key == "id" ? 29 : key == "md" ? 48 : 128;
        e.critic = disc::DiscriminatorConfig::preset(rd);
        return e;
    }
    if (key == "dark") {
        Experiment e = make_bbaf();
        e.name = "dark";
        e.paradigm.s_min = 0.05;
        return e;
    }
    if (key == "albfrag") {
        Experiment e = make_bbaf();
        e.name = "albfrag";
        e.paradigm.d_max = 9;
        e.paradigm.p_min = 100;
        return e;
    }
    if (key == "shafrag") {
        Experiment e = make_bbaf();
        e.name = "shafrag";
        e.paradigm.n_m = 16;
        return e;
    }
    if (key == "cgi" || key == "cgit" || key == "cgitd") {
        Experiment e = make_bbaf();
        e.name = key;
        e.source = key == "cgi" ? DataSource::kRealTiles
                                : (key == "cgit" ? DataSource::kRealTiles : DataSource::kRealTilesPaired);
        e.ingest_short_edge = key == "cgi" ? 0 : 180;
        return e;
    }
    throw ConfigError("unknown experiment preset: " + key);
}

std::vector<std::string> experiment_names() {
    return {"base", "ma01np", "bba",  "np",   "bbap",    "bbaf",    "bbat",
            "nosmo", "noint",  "nores", "sd",   "id",      "md",      "bd",
            "dark",  "albfrag", "shafrag", "cgi", "cgit", "cgitd"};
}

}  // namespace iik::presets
