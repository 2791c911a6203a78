#include "tempattn/trajgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tempattn/csvio.hpp"

namespace tempattn::trajgen {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "trajectory container assumes a little-endian host");

void SyntheticSpec::validate() const {
    if (n_sequences < 0) throw Error("spec: n_sequences must be >= 0");
    if (!(class_fraction_apoptosis > 0.0 && class_fraction_apoptosis < 1.0))
        throw Error("spec: class_fraction_apoptosis must be in (0,1)");
    if (t_min <= 10) throw Error("spec: t_min must be > 10");
    if (t_max < t_min) throw Error("spec: t_max must be >= t_min");
    if (late_window >= t_min) throw Error("spec: late_window must be < t_min");
    if (late_window < 1) throw Error("spec: late_window must be >= 1");
    if (noise_std < 0.0) throw Error("spec: noise_std must be >= 0");
    if (height < 8 || width < 8) throw Error("spec: patch must be at least 8x8");
    if (channels < 1) throw Error("spec: channels must be >= 1");
    if (designated_channel < 0 || designated_channel >= channels)
        throw Error("spec: designated_channel out of range");
    if (!(window_len_frac_min >= 0.5 && window_len_frac_max >= window_len_frac_min &&
          window_len_frac_max <= 1.0))
        throw Error("spec: apoptosis window must cover >= 50% of the sequence");
    if (growth_factor < 1.0) throw Error("spec: growth_factor must be >= 1");
    if (min_length <= 10) throw Error("spec: min_length must be > 10");
    if (t_min < min_length) throw Error("spec: t_min below min_length");
}

void render_cell(double center_x, double center_y, double axis_a, double axis_b,
                 double orientation, const std::vector<double>& intensity, int h,
                 int w, double noise_std, Rng& rng, float* frame_out,
                 uint8_t* mask_out) {
    if (axis_a <= 0.0 || axis_b <= 0.0) throw Error("render_cell: axes must be positive");
    for (double v : intensity)
        if (!(v >= 0.0 && v <= 1.0)) throw Error("render_cell: intensity out of [0,1]");

    const double ct = std::cos(orientation), st = std::sin(orientation);
    const int channels = static_cast<int>(intensity.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double dx = x - center_x, dy = y - center_y;
            double u = (dx * ct + dy * st) / axis_a;
            double v = (-dx * st + dy * ct) / axis_b;
            mask_out[y * w + x] = (u * u + v * v <= 1.0) ? 1 : 0;
        }
    }
    for (int c = 0; c < channels; ++c) {
        float* ch = frame_out + static_cast<size_t>(c) * h * w;
        for (int i = 0; i < h * w; ++i) {
            double val = mask_out[i] ? intensity[c] : 0.0;
            if (noise_std > 0.0) val += rng.normal(0.0, noise_std);
            ch[i] = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
    }
}

namespace {

// Base appearance constants shared by both classes; per-trajectory jitter is
// drawn around them so sequences are not carbon copies.
constexpr double kBaseIntensity[3] = {0.55, 0.35, 0.30};

struct CellTrack {
    double base_a, ratio, orientation, drift;
    double cx, cy;
    std::vector<double> base_intensity;
};

CellTrack draw_track(const SyntheticSpec& spec, Rng& rng) {
    CellTrack tr;
    tr.base_a = rng.uniform(4.5, 6.5);
    tr.ratio = rng.uniform(0.55, 0.75);
    tr.orientation = rng.uniform(0.0, 3.14159265358979323846);
    tr.drift = rng.normal(0.0, 0.02);
    tr.cx = spec.width / 2.0 + rng.uniform(-1.5, 1.5);
    tr.cy = spec.height / 2.0 + rng.uniform(-1.5, 1.5);
    tr.base_intensity.resize(spec.channels);
    for (int c = 0; c < spec.channels; ++c) {
        double base = c < 3 ? kBaseIntensity[c] : 0.3;
        tr.base_intensity[c] = std::clamp(base + rng.uniform(-0.05, 0.05), 0.05, 0.8);
    }
    return tr;
}

}  // namespace

Trajectory generate_trajectory(const SyntheticSpec& spec, Label label, Rng& rng) {
    spec.validate();
    const int t = static_cast<int>(rng.uniform_int(spec.t_min, spec.t_max));
    CellTrack tr = draw_track(spec, rng);

    // Apoptosis signal window [win_lo, win_hi).
    int win_lo = 0, win_hi = 0;
    if (label == Label::Apoptosis) {
        win_lo = static_cast<int>(std::floor(rng.uniform(0.0, spec.window_start_frac_max) * t));
        int len = static_cast<int>(
            std::ceil(rng.uniform(spec.window_len_frac_min, spec.window_len_frac_max) * t));
        win_hi = std::min(t, win_lo + len);
    }

    // Optional clutter: static off-center ellipses near the patch border.
    struct Clutter {
        double cx, cy, a, b, ori;
    };
    std::vector<Clutter> clutter;
    if (spec.clutter_prob > 0.0 && rng.bernoulli(spec.clutter_prob)) {
        int n = static_cast<int>(rng.uniform_int(1, 2));
        for (int i = 0; i < n; ++i) {
            Clutter cl;
            int side = static_cast<int>(rng.uniform_int(0, 3));
            double along = rng.uniform(0.0, 1.0);
            double off = rng.uniform(-2.0, 2.0);
            if (side == 0) { cl.cx = along * spec.width; cl.cy = off; }
            else if (side == 1) { cl.cx = along * spec.width; cl.cy = spec.height + off; }
            else if (side == 2) { cl.cx = off; cl.cy = along * spec.height; }
            else { cl.cx = spec.width + off; cl.cy = along * spec.height; }
            cl.a = rng.uniform(3.0, 5.0);
            cl.b = cl.a * rng.uniform(0.6, 0.9);
            cl.ori = rng.uniform(0.0, 3.14159265358979323846);
            clutter.push_back(cl);
        }
    }

    Trajectory traj;
    traj.frames = Video(t, spec.channels, spec.height, spec.width);
    traj.masks.assign(static_cast<size_t>(t) * spec.height * spec.width, 0);
    traj.label = label;
    traj.source_id = "synthetic";
    traj.min_length = spec.min_length;
    traj.valid_length = t;

    std::vector<double> intensity(spec.channels);
    std::vector<uint8_t> clutter_mask(static_cast<size_t>(spec.height) * spec.width);
    std::vector<float> clutter_frame(static_cast<size_t>(spec.channels) * spec.height *
                                     spec.width);

    for (int ti = 0; ti < t; ++ti) {
        double scale = 1.0;
        double ratio = tr.ratio;
        intensity = tr.base_intensity;
        if (label == Label::Mitosis) {
            if (ti >= t - spec.late_window) {
                double rho = static_cast<double>(ti - (t - spec.late_window) + 1) /
                             spec.late_window;
                scale = 1.0 + (spec.growth_factor - 1.0) * rho;
                ratio = tr.ratio + (1.0 - tr.ratio) * spec.circularization * rho;
            }
        } else {
            if (ti >= win_lo && ti < win_hi) {
                scale = spec.apoptosis_size_factor;
                intensity[spec.designated_channel] = std::clamp(
                    intensity[spec.designated_channel] + spec.intensity_gain, 0.0, 1.0);
            }
        }
        double wobble = 1.0 + rng.normal(0.0, 0.015);
        double a = std::max(1.5, tr.base_a * scale * wobble);
        double b = std::max(1.2, a * ratio);
        double ori = tr.orientation + tr.drift * ti;
        double cx = tr.cx + rng.normal(0.0, 0.25);
        double cy = tr.cy + rng.normal(0.0, 0.25);

        render_cell(cx, cy, a, b, ori, intensity, spec.height, spec.width,
                    spec.noise_std, rng, traj.frames.frame(ti), traj.mask(ti));

        // Clutter is painted over the frame but never into the mask.
        for (const auto& cl : clutter) {
            render_cell(cl.cx, cl.cy, cl.a, cl.b, cl.ori, tr.base_intensity,
                        spec.height, spec.width, 0.0, rng, clutter_frame.data(),
                        clutter_mask.data());
            for (int c = 0; c < spec.channels; ++c) {
                float* dst = traj.frames.frame(ti) + static_cast<size_t>(c) *
                                                         spec.height * spec.width;
                const float* src =
                    clutter_frame.data() + static_cast<size_t>(c) * spec.height * spec.width;
                for (int i = 0; i < spec.height * spec.width; ++i)
                    if (clutter_mask[i]) dst[i] = std::max(dst[i], src[i]);
            }
        }
    }
    return traj;
}

Trajectory generate_trajectory(const SyntheticSpec& spec, Label label, int index) {
    uint64_t seed = derive_seed(spec.master_seed, "traj", {static_cast<uint64_t>(index)});
    Rng rng(seed);
    Trajectory traj = generate_trajectory(spec, label, rng);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn-%06d", index);
    traj.traj_id = buf;
    traj.generator_seed = seed;
    return traj;
}

DatasetSplit split_dataset(const std::vector<std::pair<std::string, Label>>& labels,
                           std::array<double, 3> ratios, uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw Error("split_dataset: ratios must sum to 1");

    std::vector<size_t> per_class[2];
    for (size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<int>(labels[i].second)].push_back(i);
    for (int c = 0; c < 2; ++c)
        if (per_class[c].size() < 10)
            throw Error("split_dataset: need at least 10 sequences per class, got " +
                        std::to_string(per_class[c].size()) + " for " +
                        to_string(static_cast<Label>(c)));

    DatasetSplit out;
    out.ratios = ratios;
    out.seed = seed;
    Rng rng(derive_seed(seed, "split"));
    std::vector<std::string>* buckets[3] = {&out.train, &out.val, &out.test};

    for (int c = 0; c < 2; ++c) {
        auto& idx = per_class[c];
        rng.shuffle(idx);
        const size_t n = idx.size();
        // Largest-remainder apportionment of n over the three splits.
        size_t counts[3];
        double rem[3];
        size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            double target = ratios[s] * static_cast<double>(n);
            counts[s] = static_cast<size_t>(std::floor(target));
            rem[s] = target - std::floor(target);
            assigned += counts[s];
        }
        while (assigned < n) {
            int best = 0;
            for (int s = 1; s < 3; ++s)
                if (rem[s] > rem[best]) best = s;
            ++counts[best];
            rem[best] = -1.0;
            ++assigned;
        }
        size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (size_t k = 0; k < counts[s]; ++k)
                buckets[s]->push_back(labels[idx[pos++]].first);
    }
    return out;
}

namespace {

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
    uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4))
        throw Error("trajectory file truncated: " + path);
    return v;
}

std::string sidecar_path(const std::string& path) {
    fs::path p(path);
    p.replace_extension(".json");
    return p.string();
}

}  // namespace

void save_trajectory(const Trajectory& traj, const std::string& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write trajectory: " + path);
        out.write("TRJ1", 4);
        write_u32(out, static_cast<uint32_t>(traj.frames.t));
        write_u32(out, static_cast<uint32_t>(traj.frames.c));
        write_u32(out, static_cast<uint32_t>(traj.frames.h));
        write_u32(out, static_cast<uint32_t>(traj.frames.w));
        out.write(reinterpret_cast<const char*>(traj.frames.data.data()),
                  static_cast<std::streamsize>(traj.frames.data.size() * sizeof(float)));
        uint8_t has_mask = traj.has_masks() ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&has_mask), 1);
        if (has_mask)
            out.write(reinterpret_cast<const char*>(traj.masks.data()),
                      static_cast<std::streamsize>(traj.masks.size()));
        if (!out) throw Error("write failed: " + path);
    }
    json side = {{"traj_id", traj.traj_id},
                 {"source_id", traj.source_id},
                 {"label", to_string(traj.label)},
                 {"min_length", traj.min_length},
                 {"generator_seed", traj.generator_seed}};
    std::ofstream js(sidecar_path(path), std::ios::binary);
    if (!js) throw Error("cannot write sidecar: " + sidecar_path(path));
    js << side.dump(2) << "\n";
}

Trajectory load_trajectory(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open trajectory: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TRJ1", 4) != 0)
        throw Error("bad magic in trajectory file: " + path);
    uint32_t t = read_u32(in, path), c = read_u32(in, path);
    uint32_t h = read_u32(in, path), w = read_u32(in, path);
    if (t == 0 || c == 0 || h == 0 || w == 0 || t > 1u << 20 || c > 64 || h > 4096 ||
        w > 4096)
        throw Error("implausible dimensions in trajectory file: " + path);

    Trajectory traj;
    traj.frames = Video(static_cast<int>(t), static_cast<int>(c), static_cast<int>(h),
                        static_cast<int>(w));
    if (!in.read(reinterpret_cast<char*>(traj.frames.data.data()),
                 static_cast<std::streamsize>(traj.frames.data.size() * sizeof(float))))
        throw Error("trajectory file truncated: " + path);
    uint8_t has_mask = 0;
    if (!in.read(reinterpret_cast<char*>(&has_mask), 1))
        throw Error("trajectory file truncated: " + path);
    if (has_mask) {
        traj.masks.resize(static_cast<size_t>(t) * h * w);
        if (!in.read(reinterpret_cast<char*>(traj.masks.data()),
                     static_cast<std::streamsize>(traj.masks.size())))
            throw Error("trajectory file truncated: " + path);
    }

    std::ifstream js(sidecar_path(path));
    if (!js) throw Error("missing sidecar: " + sidecar_path(path));
    json side = json::parse(js, nullptr, false);
    if (side.is_discarded()) throw Error("malformed sidecar: " + sidecar_path(path));
    traj.traj_id = side.value("traj_id", "");
    traj.source_id = side.value("source_id", "");
    traj.label = label_from_string(side.value("label", "mitosis"));
    traj.min_length = side.value("min_length", 11);
    traj.generator_seed = side.value("generator_seed", 0ULL);
    traj.valid_length = traj.frames.t;
    return traj;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries,
                    const std::string& config_hash, uint64_t master_seed) {
    CsvWriter csv(path);
    csv.standard_comments(config_hash, master_seed);
    csv.row({"traj_id", "path", "label", "split"});
    for (const auto& e : entries)
        csv.row({e.traj_id, e.path, to_string(e.label), e.split});
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    CsvReader csv(path);
    std::vector<std::string> cells;
    if (!csv.next(cells) || cells.size() != 4 || cells[0] != "traj_id")
        throw Error("bad manifest header: " + path);
    std::vector<ManifestEntry> entries;
    while (csv.next(cells)) {
        if (cells.size() != 4) throw Error("bad manifest row: " + path);
        ManifestEntry e;
        e.traj_id = cells[0];
        e.path = cells[1];
        e.label = label_from_string(cells[2]);
        e.split = cells[3];
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace tempattn::trajgen
