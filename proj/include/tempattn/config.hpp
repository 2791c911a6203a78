#pragma once

#include <array>
#include <string>
#include <vector>

#include "tempattn/evalmod.hpp"
#include "tempattn/model.hpp"
#include "tempattn/train.hpp"
#include "tempattn/trajgen.hpp"

namespace tempattn::config {

struct ExplainConfig {
    double quantile = 0.9;
    int permutation_iters = 50000;
    int bootstrap_resamples = 10000;
    double ci_level = 0.95;
    int window = 50;
};

/// One declarative plain-text config: `key = value` lines, '#' comments,
/// dotted keys (e.g. train.learning_rate). CLI overrides reuse the same
/// key=value syntax. Every artifact header records hash() of the canonical
/// serialization.
struct RunConfig {
    uint64_t master_seed = 42;
    int threads = 0;  // 0 = hardware concurrency
    std::string out_dir = "out";
    std::string data_dir;  // empty = <out_dir>/dataset

    trajgen::SyntheticSpec data;
    std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
    uint64_t split_seed = 0;  // 0 = derive from master_seed

    encoder::EncoderConfig encoder;
    temporal::TemporalConfig temporal;
    train::TrainConfig train;
    ExplainConfig explain;
    std::vector<int> k_list{0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};

    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    void apply_override(const std::string& key, const std::string& value);
    void finalize();  // propagate master seed, fill derived fields, validate

    std::string canonical() const;
    std::string hash() const;

    std::string dataset_dir() const { return data_dir.empty() ? out_dir + "/dataset" : data_dir; }
    std::string manifest_path() const { return dataset_dir() + "/manifest.csv"; }
    std::string checkpoint_path() const { return out_dir + "/model.ckpt"; }
    std::string model_manifest_path() const { return out_dir + "/model.json"; }
    std::string train_log_path() const { return out_dir + "/train_log.csv"; }
};

/// Parses "0,5,10" or "0:50:5" (inclusive range with step).
std::vector<int> parse_k_list(const std::string& text);

}  // namespace tempattn::config
