#pragma once

#include <string>

#include "tempattn/model.hpp"
#include "tempattn/nn.hpp"

namespace tempattn::checkpoint {

/// Binary blob of named tensors: u16 name length, UTF-8 name, u32 rank,
/// rank x u32 dims, float32 row-major data. Little-endian throughout.
void save(const std::string& path, const nn::ParamSet<float>& params);

/// Fills an existing parameter set by name; every parameter must be present
/// with matching dims and no extra tensors may remain.
void load(const std::string& path, nn::ParamSet<float>& params);

/// Model manifest JSON (configs + decision threshold) next to the blob.
void save_model(const model::FateModel<float>& m, const std::string& ckpt_path,
                const std::string& manifest_path, uint64_t master_seed);

model::ModelConfig load_model_config(const std::string& manifest_path);

model::FateModel<float> load_model(const std::string& ckpt_path,
                                   const std::string& manifest_path);

}  // namespace tempattn::checkpoint
