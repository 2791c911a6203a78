#include "tempattn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tempattn/csvio.hpp"
#include "tempattn/rng.hpp"

namespace tempattn::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error("config: bad integer for " + key + ": '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error("config: bad unsigned integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error("config: bad number for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::vector<encoder::ConvBlockSpec> parse_blocks(const std::string& key,
                                                 const std::string& v) {
    std::vector<encoder::ConvBlockSpec> blocks;
    for (const auto& item : split_list(v)) {
        int c = 0, k = 0, s = 0;
        if (std::sscanf(item.c_str(), "%d:%d:%d", &c, &k, &s) != 3)
            throw Error("config: bad conv block '" + item + "' for " + key +
                        " (want out:kernel:stride)");
        blocks.push_back({c, k, s});
    }
    if (blocks.empty()) throw Error("config: empty block list for " + key);
    return blocks;
}

std::string blocks_to_string(const std::vector<encoder::ConvBlockSpec>& blocks) {
    std::string out;
    for (size_t i = 0; i < blocks.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(blocks[i].out_channels) + ":" +
               std::to_string(blocks[i].kernel) + ":" + std::to_string(blocks[i].stride);
    }
    return out;
}

std::string d2s(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<int> parse_k_list(const std::string& text) {
    std::vector<int> ks;
    std::string t = trim(text);
    if (t.find(':') != std::string::npos) {
        int a = 0, b = 0, s = 0;
        if (std::sscanf(t.c_str(), "%d:%d:%d", &a, &b, &s) != 3 || s <= 0)
            throw Error("bad k range '" + t + "' (want start:end:step)");
        for (int k = a; k <= b; k += s) ks.push_back(k);
    } else {
        for (const auto& item : split_list(t))
            if (!item.empty()) ks.push_back(to_int("k_list", item));
    }
    if (ks.empty()) throw Error("empty k list");
    for (size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1]) throw Error("k list must be strictly increasing");
    return ks;
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "master_seed") master_seed = to_u64(key, v);
    else if (key == "threads") threads = to_int(key, v);
    else if (key == "out_dir") out_dir = v;
    else if (key == "data_dir") data_dir = v;
    else if (key == "split_seed") split_seed = to_u64(key, v);
    else if (key == "split_ratios") {
        auto parts = split_list(v);
        if (parts.size() != 3) throw Error("config: split_ratios needs 3 values");
        for (int i = 0; i < 3; ++i) split_ratios[i] = to_double(key, parts[i]);
    }
    else if (key == "data.n_sequences") data.n_sequences = to_int(key, v);
    else if (key == "data.class_fraction_apoptosis") data.class_fraction_apoptosis = to_double(key, v);
    else if (key == "data.t_min") data.t_min = to_int(key, v);
    else if (key == "data.t_max") data.t_max = to_int(key, v);
    else if (key == "data.height") data.height = to_int(key, v);
    else if (key == "data.width") data.width = to_int(key, v);
    else if (key == "data.channels") data.channels = to_int(key, v);
    else if (key == "data.min_length") data.min_length = to_int(key, v);
    else if (key == "data.late_window") data.late_window = to_int(key, v);
    else if (key == "data.growth_factor") data.growth_factor = to_double(key, v);
    else if (key == "data.circularization") data.circularization = to_double(key, v);
    else if (key == "data.apoptosis_size_factor") data.apoptosis_size_factor = to_double(key, v);
    else if (key == "data.intensity_gain") data.intensity_gain = to_double(key, v);
    else if (key == "data.designated_channel") data.designated_channel = to_int(key, v);
    else if (key == "data.window_start_frac_max") data.window_start_frac_max = to_double(key, v);
    else if (key == "data.window_len_frac_min") data.window_len_frac_min = to_double(key, v);
    else if (key == "data.window_len_frac_max") data.window_len_frac_max = to_double(key, v);
    else if (key == "data.noise_std") data.noise_std = to_double(key, v);
    else if (key == "data.clutter_prob") data.clutter_prob = to_double(key, v);
    else if (key == "encoder.blocks") encoder.blocks = parse_blocks(key, v);
    else if (key == "encoder.embed_dim") encoder.embed_dim = to_int(key, v);
    else if (key == "temporal.n_layers") temporal.n_layers = to_int(key, v);
    else if (key == "temporal.n_heads") temporal.n_heads = to_int(key, v);
    else if (key == "temporal.model_dim") temporal.model_dim = to_int(key, v);
    else if (key == "temporal.ff_dim") temporal.ff_dim = to_int(key, v);
    else if (key == "temporal.dropout") temporal.dropout = to_double(key, v);
    else if (key == "temporal.positional_encoding") temporal.positional_encoding = to_bool(key, v);
    else if (key == "temporal.threshold") temporal.threshold = to_double(key, v);
    else if (key == "train.batch_size") train.batch_size = to_int(key, v);
    else if (key == "train.learning_rate") train.learning_rate = to_double(key, v);
    else if (key == "train.weight_decay") train.weight_decay = to_double(key, v);
    else if (key == "train.max_epochs") train.max_epochs = to_int(key, v);
    else if (key == "train.patience") train.patience = to_int(key, v);
    else if (key == "train.p_hflip") train.augment.hflip = to_double(key, v);
    else if (key == "train.p_vflip") train.augment.vflip = to_double(key, v);
    else if (key == "train.p_jitter") train.augment.jitter = to_double(key, v);
    else if (key == "train.p_blur") train.augment.blur = to_double(key, v);
    else if (key == "train.p_endmask") train.augment.endmask = to_double(key, v);
    else if (key == "train.endmask_lo") train.augment.endmask_lo = to_double(key, v);
    else if (key == "train.endmask_hi") train.augment.endmask_hi = to_double(key, v);
    else if (key == "explain.quantile") explain.quantile = to_double(key, v);
    else if (key == "explain.permutation_iters") explain.permutation_iters = to_int(key, v);
    else if (key == "explain.bootstrap_resamples") explain.bootstrap_resamples = to_int(key, v);
    else if (key == "explain.ci_level") explain.ci_level = to_double(key, v);
    else if (key == "explain.window") explain.window = to_int(key, v);
    else if (key == "eval.k_list") k_list = parse_k_list(v);
    else throw Error("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(lineno) + ": expected key = value");
        cfg.apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config file not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

void RunConfig::finalize() {
    data.master_seed = master_seed;
    train.master_seed = master_seed;
    if (split_seed == 0) split_seed = derive_seed(master_seed, "split-seed");
    encoder.in_channels = data.channels;
    encoder.in_h = data.height;
    encoder.in_w = data.width;
    data.validate();
    encoder.validate();
    temporal.validate();
    train.validate();
    if (!(explain.quantile > 0.0 && explain.quantile < 1.0))
        throw Error("config: explain.quantile must be in (0,1)");
    if (explain.permutation_iters < 1 || explain.bootstrap_resamples < 1)
        throw Error("config: explain iteration counts must be >= 1");
    if (!(explain.ci_level > 0.0 && explain.ci_level < 1.0))
        throw Error("config: explain.ci_level must be in (0,1)");
    if (explain.window < 1) throw Error("config: explain.window must be >= 1");
}

std::string RunConfig::canonical() const {
    // Paths and the thread cap are deliberately left out: they do not affect
    // computed results, and artifacts from identical runs in different
    // directories must stay byte-identical.
    std::map<std::string, std::string> kv;
    kv["master_seed"] = std::to_string(master_seed);
    kv["split_seed"] = std::to_string(split_seed);
    kv["split_ratios"] = d2s(split_ratios[0]) + "," + d2s(split_ratios[1]) + "," +
                         d2s(split_ratios[2]);
    kv["data.n_sequences"] = std::to_string(data.n_sequences);
    kv["data.class_fraction_apoptosis"] = d2s(data.class_fraction_apoptosis);
    kv["data.t_min"] = std::to_string(data.t_min);
    kv["data.t_max"] = std::to_string(data.t_max);
    kv["data.height"] = std::to_string(data.height);
    kv["data.width"] = std::to_string(data.width);
    kv["data.channels"] = std::to_string(data.channels);
    kv["data.min_length"] = std::to_string(data.min_length);
    kv["data.late_window"] = std::to_string(data.late_window);
    kv["data.growth_factor"] = d2s(data.growth_factor);
    kv["data.circularization"] = d2s(data.circularization);
    kv["data.apoptosis_size_factor"] = d2s(data.apoptosis_size_factor);
    kv["data.intensity_gain"] = d2s(data.intensity_gain);
    kv["data.designated_channel"] = std::to_string(data.designated_channel);
    kv["data.window_start_frac_max"] = d2s(data.window_start_frac_max);
    kv["data.window_len_frac_min"] = d2s(data.window_len_frac_min);
    kv["data.window_len_frac_max"] = d2s(data.window_len_frac_max);
    kv["data.noise_std"] = d2s(data.noise_std);
    kv["data.clutter_prob"] = d2s(data.clutter_prob);
    kv["encoder.blocks"] = blocks_to_string(encoder.blocks);
    kv["encoder.embed_dim"] = std::to_string(encoder.embed_dim);
    kv["temporal.n_layers"] = std::to_string(temporal.n_layers);
    kv["temporal.n_heads"] = std::to_string(temporal.n_heads);
    kv["temporal.model_dim"] = std::to_string(temporal.model_dim);
    kv["temporal.ff_dim"] = std::to_string(temporal.ff_dim);
    kv["temporal.dropout"] = d2s(temporal.dropout);
    kv["temporal.positional_encoding"] = temporal.positional_encoding ? "true" : "false";
    kv["temporal.threshold"] = d2s(temporal.threshold);
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.learning_rate"] = d2s(train.learning_rate);
    kv["train.weight_decay"] = d2s(train.weight_decay);
    kv["train.max_epochs"] = std::to_string(train.max_epochs);
    kv["train.patience"] = std::to_string(train.patience);
    kv["train.p_hflip"] = d2s(train.augment.hflip);
    kv["train.p_vflip"] = d2s(train.augment.vflip);
    kv["train.p_jitter"] = d2s(train.augment.jitter);
    kv["train.p_blur"] = d2s(train.augment.blur);
    kv["train.p_endmask"] = d2s(train.augment.endmask);
    kv["train.endmask_lo"] = d2s(train.augment.endmask_lo);
    kv["train.endmask_hi"] = d2s(train.augment.endmask_hi);
    kv["explain.quantile"] = d2s(explain.quantile);
    kv["explain.permutation_iters"] = std::to_string(explain.permutation_iters);
    kv["explain.bootstrap_resamples"] = std::to_string(explain.bootstrap_resamples);
    kv["explain.ci_level"] = d2s(explain.ci_level);
    kv["explain.window"] = std::to_string(explain.window);
    std::string klist;
    for (size_t i = 0; i < k_list.size(); ++i) {
        if (i) klist += ",";
        klist += std::to_string(k_list[i]);
    }
    kv["eval.k_list"] = klist;

    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string RunConfig::hash() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical())));
    return buf;
}

}  // namespace tempattn::config
