#include "tempattn/checkpoint.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace tempattn::checkpoint {

using nlohmann::json;

namespace {

void write_u16(std::ofstream& out, uint16_t v) {
    out.write(reinterpret_cast<const char*>(&v), 2);
}
void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

void save(const std::string& path, const nn::ParamSet<float>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    std::vector<float> buf;
    for (const auto& e : params.entries) {
        if (e.name.size() > 0xffff) throw Error("tensor name too long: " + e.name);
        write_u16(out, static_cast<uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_u32(out, static_cast<uint32_t>(e.dims.size()));
        for (uint32_t d : e.dims) write_u32(out, d);
        buf.resize(static_cast<size_t>(e.value.size()));
        size_t k = 0;
        for (Eigen::Index i = 0; i < e.value.rows(); ++i)
            for (Eigen::Index j = 0; j < e.value.cols(); ++j) buf[k++] = e.value(i, j);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw Error("write failed: " + path);
}

void load(const std::string& path, nn::ParamSet<float>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint not found: " + path);

    std::map<std::string, int> index;
    for (size_t i = 0; i < params.entries.size(); ++i)
        index[params.entries[i].name] = static_cast<int>(i);
    std::vector<bool> seen(params.entries.size(), false);

    std::vector<float> buf;
    while (true) {
        uint16_t name_len = 0;
        if (!in.read(reinterpret_cast<char*>(&name_len), 2)) break;  // clean EOF
        std::string name(name_len, '\0');
        uint32_t rank = 0;
        if (!in.read(name.data(), name_len) ||
            !in.read(reinterpret_cast<char*>(&rank), 4))
            throw Error("checkpoint truncated: " + path);
        if (rank > 8) throw Error("checkpoint: implausible tensor rank in " + path);
        std::vector<uint32_t> dims(rank);
        size_t count = 1;
        for (uint32_t& d : dims) {
            if (!in.read(reinterpret_cast<char*>(&d), 4))
                throw Error("checkpoint truncated: " + path);
            count *= d;
        }
        auto it = index.find(name);
        if (it == index.end()) throw Error("checkpoint: unexpected tensor " + name);
        auto& e = params.entries[it->second];
        if (dims != e.dims) throw Error("checkpoint: dims mismatch for " + name);
        if (count != static_cast<size_t>(e.value.size()))
            throw Error("checkpoint: size mismatch for " + name);
        buf.resize(count);
        if (!in.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(count * sizeof(float))))
            throw Error("checkpoint truncated: " + path);
        size_t k = 0;
        for (Eigen::Index i = 0; i < e.value.rows(); ++i)
            for (Eigen::Index j = 0; j < e.value.cols(); ++j) e.value(i, j) = buf[k++];
        seen[it->second] = true;
    }
    for (size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw Error("checkpoint: missing tensor " + params.entries[i].name);
}

void save_model(const model::FateModel<float>& m, const std::string& ckpt_path,
                const std::string& manifest_path, uint64_t master_seed) {
    save(ckpt_path, m.params());

    const auto& cfg = m.config();
    json blocks = json::array();
    for (const auto& b : cfg.encoder.blocks)
        blocks.push_back({{"out_channels", b.out_channels},
                          {"kernel", b.kernel},
                          {"stride", b.stride}});
    json j = {
        {"version", std::string(kVersion)},
        {"master_seed", master_seed},
        {"encoder",
         {{"blocks", blocks},
          {"in_channels", cfg.encoder.in_channels},
          {"in_h", cfg.encoder.in_h},
          {"in_w", cfg.encoder.in_w},
          {"embed_dim", cfg.encoder.embed_dim}}},
        {"temporal",
         {{"n_layers", cfg.temporal.n_layers},
          {"n_heads", cfg.temporal.n_heads},
          {"model_dim", cfg.temporal.model_dim},
          {"ff_dim", cfg.temporal.ff_dim},
          {"dropout", cfg.temporal.dropout},
          {"positional_encoding", cfg.temporal.positional_encoding},
          {"threshold", cfg.temporal.threshold}}},
    };
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw Error("cannot write model manifest: " + manifest_path);
    out << j.dump(2) << "\n";
}

model::ModelConfig load_model_config(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("model manifest not found: " + manifest_path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("malformed model manifest: " + manifest_path);

    model::ModelConfig cfg;
    cfg.encoder.blocks.clear();
    for (const auto& b : j.at("encoder").at("blocks"))
        cfg.encoder.blocks.push_back({b.at("out_channels").get<int>(),
                                      b.at("kernel").get<int>(),
                                      b.at("stride").get<int>()});
    cfg.encoder.in_channels = j.at("encoder").at("in_channels").get<int>();
    cfg.encoder.in_h = j.at("encoder").at("in_h").get<int>();
    cfg.encoder.in_w = j.at("encoder").at("in_w").get<int>();
    cfg.encoder.embed_dim = j.at("encoder").at("embed_dim").get<int>();
    cfg.temporal.n_layers = j.at("temporal").at("n_layers").get<int>();
    cfg.temporal.n_heads = j.at("temporal").at("n_heads").get<int>();
    cfg.temporal.model_dim = j.at("temporal").at("model_dim").get<int>();
    cfg.temporal.ff_dim = j.at("temporal").at("ff_dim").get<int>();
    cfg.temporal.dropout = j.at("temporal").at("dropout").get<double>();
    cfg.temporal.positional_encoding = j.at("temporal").at("positional_encoding").get<bool>();
    cfg.temporal.threshold = j.at("temporal").at("threshold").get<double>();
    return cfg;
}

model::FateModel<float> load_model(const std::string& ckpt_path,
                                   const std::string& manifest_path) {
    model::FateModel<float> m(load_model_config(manifest_path));
    load(ckpt_path, m.params());
    return m;
}

}  // namespace tempattn::checkpoint
