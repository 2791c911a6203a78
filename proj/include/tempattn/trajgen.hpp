#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/rng.hpp"

namespace tempattn::trajgen {

/// Parameters of the synthetic trajectory generator. The planted signals are
/// class-dependent: the mitosis-like class grows and rounds up over the final
/// `late_window` frames; the apoptosis-like class carries an elevated
/// designated-channel intensity over a contiguous window covering at least
/// half of the sequence, plus a mild size increase inside that window.
struct SyntheticSpec {
    int n_sequences = 2500;
    double class_fraction_apoptosis = 0.2;
    int t_min = 20;
    int t_max = 60;
    int height = 32;
    int width = 32;
    int channels = 3;
    int min_length = 11;

    int late_window = 5;            // w: mitosis signal length (final frames)
    double growth_factor = 1.6;     // mitosis axis scale at the last frame
    double circularization = 1.0;   // 0 = keep aspect, 1 = fully round by the end
    double apoptosis_size_factor = 1.15;
    double intensity_gain = 0.25;   // designated-channel elevation inside the window
    int designated_channel = 2;
    double window_start_frac_max = 0.15;
    double window_len_frac_min = 0.55;
    double window_len_frac_max = 0.75;

    double noise_std = 0.05;
    double clutter_prob = 0.0;      // extra border ellipses, off by default
    uint64_t master_seed = 42;

    void validate() const;
};

/// Renders one noisy ellipse cell into a fresh [C, H, W] frame plus its
/// binary mask. The ellipse is clipped silently at patch borders
/// (zero-padding semantics). Intensities must be in [0, 1], axes positive.
void render_cell(double center_x, double center_y, double axis_a, double axis_b,
                 double orientation, const std::vector<double>& intensity, int h,
                 int w, double noise_std, Rng& rng, float* frame_out,
                 uint8_t* mask_out);

/// Pure function of (spec, label, rng stream). Does not set traj_id.
Trajectory generate_trajectory(const SyntheticSpec& spec, Label label, Rng& rng);

/// Indexed variant: seeds an independent stream from (master_seed, index) and
/// assigns "syn-NNNNNN" ids, so parallel generation is order-independent.
Trajectory generate_trajectory(const SyntheticSpec& spec, Label label, int index);

struct DatasetSplit {
    std::vector<std::string> train, val, test;
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    uint64_t seed = 0;
};

/// Stratified split, deterministic given the seed. Rejects inputs with fewer
/// than 10 sequences in either class.
DatasetSplit split_dataset(const std::vector<std::pair<std::string, Label>>& labels,
                           std::array<double, 3> ratios, uint64_t seed);

/// Binary container ("TRJ1" magic) + JSON sidecar; round-trip is bit-exact.
void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

struct ManifestEntry {
    std::string traj_id;
    std::string path;
    Label label = Label::Mitosis;
    std::string split;
};

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries,
                    const std::string& config_hash, uint64_t master_seed);
std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace tempattn::trajgen
