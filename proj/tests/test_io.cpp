#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tempattn/checkpoint.hpp"
#include "tempattn/trajgen.hpp"

using namespace tempattn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("tempattn_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("trajectory container round-trip is bit-exact") {
    TempDir dir;
    trajgen::SyntheticSpec spec;
    spec.t_min = 12;
    spec.t_max = 15;
    spec.height = 16;
    spec.width = 16;
    Trajectory traj = trajgen::generate_trajectory(spec, Label::Apoptosis, 3);
    trajgen::save_trajectory(traj, dir.file("t.trj"));
    Trajectory back = trajgen::load_trajectory(dir.file("t.trj"));
    CHECK(back.frames.data == traj.frames.data);
    CHECK(back.masks == traj.masks);
    CHECK(back.label == traj.label);
    CHECK(back.traj_id == traj.traj_id);
    CHECK(back.source_id == traj.source_id);
    CHECK(back.min_length == traj.min_length);
    CHECK(back.generator_seed == traj.generator_seed);
}

TEST_CASE("container payload arithmetic: header (12,3,32,32)") {
    TempDir dir;
    Trajectory traj;
    traj.frames = Video(12, 3, 32, 32);
    traj.valid_length = 12;
    traj.traj_id = "arith";
    trajgen::save_trajectory(traj, dir.file("a.trj"));
    // magic(4) + 4*u32 + payload + has_mask(1), no mask
    auto size = fs::file_size(dir.file("a.trj"));
    CHECK(size == 4 + 16 + 12 * 3 * 32 * 32 * 4 + 1);
}

TEST_CASE("container with mask: payload includes T*H*W mask bytes") {
    TempDir dir;
    Trajectory traj;
    traj.frames = Video(11, 1, 8, 8);
    traj.masks.assign(11 * 8 * 8, 1);
    traj.valid_length = 11;
    trajgen::save_trajectory(traj, dir.file("m.trj"));
    CHECK(fs::file_size(dir.file("m.trj")) == 4 + 16 + 11 * 64 * 4 + 1 + 11 * 64);
}

TEST_CASE("bad magic is rejected with no partial object") {
    TempDir dir;
    {
        std::ofstream out(dir.file("bad.trj"), std::ios::binary);
        out << "NOPE" << std::string(64, '\0');
    }
    {
        std::ofstream side(dir.file("bad.json"));
        side << "{}";
    }
    CHECK_THROWS_WITH_AS(trajgen::load_trajectory(dir.file("bad.trj")),
                         doctest::Contains("bad magic"), Error);
}

TEST_CASE("truncated payload is rejected") {
    TempDir dir;
    Trajectory traj;
    traj.frames = Video(11, 1, 8, 8);
    traj.valid_length = 11;
    trajgen::save_trajectory(traj, dir.file("t.trj"));
    auto full = fs::file_size(dir.file("t.trj"));
    fs::resize_file(dir.file("t.trj"), full - 100);
    CHECK_THROWS_WITH_AS(trajgen::load_trajectory(dir.file("t.trj")),
                         doctest::Contains("truncated"), Error);
}

TEST_CASE("missing file names the path") {
    CHECK_THROWS_WITH_AS(trajgen::load_trajectory("/nonexistent/x.trj"),
                         doctest::Contains("/nonexistent/x.trj"), Error);
}

TEST_CASE("manifest round-trip") {
    TempDir dir;
    std::vector<trajgen::ManifestEntry> entries = {
        {"syn-000000", "syn-000000.trj", Label::Apoptosis, "train"},
        {"syn-000001", "syn-000001.trj", Label::Mitosis, "test"},
    };
    trajgen::write_manifest(dir.file("manifest.csv"), entries, "cafebabe", 7);
    auto back = trajgen::read_manifest(dir.file("manifest.csv"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].traj_id == "syn-000000");
    CHECK(back[0].label == Label::Apoptosis);
    CHECK(back[0].split == "train");
    CHECK(back[1].label == Label::Mitosis);

    // comment header present
    std::ifstream in(dir.file("manifest.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# tempattn", 0) == 0);
}

TEST_CASE("checkpoint: named-tensor round trip and error paths") {
    nn::ParamSet<float> p;
    p.add("a.weight", 3, 4, nn::Init::XavierUniform, {3, 4});
    p.add("a.bias", 3, 1, nn::Init::Zero, {3});
    p.add("b.weight", 2, 6, nn::Init::HeNormal, {2, 3, 2});
    p.initialize(11);

    TempDir dir;
    checkpoint::save(dir.file("m.ckpt"), p);

    nn::ParamSet<float> q;
    q.add("a.weight", 3, 4, nn::Init::Zero, {3, 4});
    q.add("a.bias", 3, 1, nn::Init::Zero, {3});
    q.add("b.weight", 2, 6, nn::Init::Zero, {2, 3, 2});
    checkpoint::load(dir.file("m.ckpt"), q);
    for (size_t i = 0; i < p.entries.size(); ++i)
        CHECK(p.entries[i].value == q.entries[i].value);

    // missing tensor in the target set -> unexpected tensor error
    nn::ParamSet<float> partial;
    partial.add("a.weight", 3, 4, nn::Init::Zero, {3, 4});
    CHECK_THROWS_WITH_AS(checkpoint::load(dir.file("m.ckpt"), partial),
                         doctest::Contains("unexpected tensor"), Error);

    // dims mismatch
    nn::ParamSet<float> wrong;
    wrong.add("a.weight", 3, 4, nn::Init::Zero, {4, 3});
    wrong.add("a.bias", 3, 1, nn::Init::Zero, {3});
    wrong.add("b.weight", 2, 6, nn::Init::Zero, {2, 3, 2});
    CHECK_THROWS_WITH_AS(checkpoint::load(dir.file("m.ckpt"), wrong),
                         doctest::Contains("dims mismatch"), Error);

    CHECK_THROWS_WITH_AS(checkpoint::load(dir.file("absent.ckpt"), q),
                         doctest::Contains("not found"), Error);
}

TEST_CASE("model manifest round trip preserves configs") {
    TempDir dir;
    model::ModelConfig cfg;
    cfg.encoder.blocks = {{8, 3, 2}, {16, 3, 2}};
    cfg.encoder.in_channels = 2;
    cfg.encoder.in_h = 16;
    cfg.encoder.in_w = 16;
    cfg.encoder.embed_dim = 24;
    cfg.temporal.n_layers = 2;
    cfg.temporal.n_heads = 2;
    cfg.temporal.model_dim = 24;
    cfg.temporal.dropout = 0.05;
    model::FateModel<float> m(cfg);
    m.init(5);
    checkpoint::save_model(m, dir.file("m.ckpt"), dir.file("m.json"), 5);

    auto loaded = checkpoint::load_model(dir.file("m.ckpt"), dir.file("m.json"));
    CHECK(loaded.config().encoder.blocks.size() == 2);
    CHECK(loaded.config().encoder.embed_dim == 24);
    CHECK(loaded.config().temporal.n_layers == 2);
    CHECK(loaded.params().entries.size() == m.params().entries.size());
    for (size_t i = 0; i < m.params().entries.size(); ++i)
        CHECK(loaded.params().entries[i].value == m.params().entries[i].value);
}
