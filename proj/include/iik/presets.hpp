#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "iik/decomposer.hpp"
#include "iik/discriminator.hpp"
#include "iik/inference.hpp"
#include "iik/paradigm.hpp"
#include "iik/training.hpp"

// Named experiment configurations: one struct bundling everything a run
// needs (data source, paradigm parameters, network and critic architecture,
// loss switches, and the inference averaging scheme).  Keys are lowercase.
//
//   base     plain supervised + adversarial training, no masking, no EMA;
//            inference averages the last few checkpoints
//   ma01np   adds the parameter moving average and per-example masking
//            (each training pair supervises albedo or shading, not both)
//   bba      ma01np model, wider averaging (15 tiles, 5 scales)
//   np       like bba but the decomposer never sees the location code
//   bbap     bba plus the pointwise polish
//   bbaf     bbap plus discrete image averaging
//   bbat     bbap plus discrete tile averaging
//   nosmo    no adversarial smoothing (alpha_d = 0)
//   noint    no interpolation losses (alpha_a = alpha_s = 0)
//   nores    no real reconstruction loss (alpha_rr = 0)
//   sd/id/md/bd   critic receptive field 10/29/48/128 (default 22)
//   dark     shading paradigm with higher dynamic range (s_min = 0.05)
//   albfrag  albedo paradigm with very small fragments (d_max 9, p_min 100)
//   shafrag  shading paradigm with very small fragments (n_m = 16)
//   cgi      albedo/shading tiles cut independently from ingested renders
//   cgit     as cgi, images first resized to 180 px on the short edge
//   cgitd    as cgit, but albedo/shading tiles stay paired per image

namespace iik::presets {

enum class DataSource { kParadigm, kRealTiles, kRealTilesPaired };

const char* data_source_name(DataSource s);
DataSource data_source_from_name(const std::string& name);

struct Experiment {
    std::string name;
    DataSource source = DataSource::kParadigm;
    int ingest_short_edge = 0;  // resize ingested images before tiling; 0 keeps native scale

    paradigm::ParadigmConfig paradigm;
    dec::DecomposerConfig decomposer;
    disc::DiscriminatorConfig critic;
    train::LossWeights weights;
    train::TrainConfig training;
    infer::AveragingConfig averaging;

    bool use_ema = true;        // evaluate the shadow parameters
    int checkpoint_average = 1; // otherwise, average this many trailing checkpoints

    void validate() const;
    nlohmann::json to_json() const;
    static Experiment from_json(const nlohmann::json& j);
};

Experiment experiment_preset(const std::string& key);
std::vector<std::string> experiment_names();

}  // namespace iik::presets
