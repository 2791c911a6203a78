#pragma once

#include <string>
#include <vector>

#include "tempattn/config.hpp"
#include "tempattn/evalmod.hpp"
#include "tempattn/explain.hpp"
#include "tempattn/morphfeat.hpp"

namespace tempattn::pipeline {

/// Command bodies shared by the CLI, the python bindings and the acceptance
/// suite. Each one reads/writes only the artifacts documented in the README
/// and is idempotent for identical inputs and seed.
void cmd_generate(const config::RunConfig& cfg);
void cmd_train(const config::RunConfig& cfg);
void cmd_eval(const config::RunConfig& cfg);
void cmd_sweep(const config::RunConfig& cfg, eval::Protocol protocol,
               const std::vector<int>& ks);
void cmd_explain(const config::RunConfig& cfg);
void cmd_features(const config::RunConfig& cfg);

/// Loads the trajectories of one split ("train", "val", "test" or "all").
std::vector<Trajectory> load_split(const config::RunConfig& cfg,
                                   const std::string& split, bool keep_masks);

/// Ground-truth-mask features for every frame with a usable central region.
morphfeat::FeatureTable compute_feature_table(const std::vector<Trajectory>& trajs,
                                              int threads);

}  // namespace tempattn::pipeline
