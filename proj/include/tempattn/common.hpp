#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tempattn {

inline constexpr std::string_view kVersion = "0.1.0";

/// Error type for all recoverable failures (bad formats, invalid configs,
/// missing inputs). The CLI maps these to a machine-readable error line.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Label : int { Mitosis = 0, Apoptosis = 1 };

inline std::string to_string(Label l) {
    return l == Label::Apoptosis ? "apoptosis" : "mitosis";
}

inline Label label_from_string(std::string_view s) {
    if (s == "mitosis") return Label::Mitosis;
    if (s == "apoptosis") return Label::Apoptosis;
    throw Error("unknown label: " + std::string(s));
}

/// Dense [T, C, H, W] float volume, row-major, values expected in [0, 1].
struct Video {
    int t = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Video() = default;
    Video(int t_, int c_, int h_, int w_)
        : t(t_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(t_) * c_ * h_ * w_, 0.0f) {}

    size_t frame_size() const { return static_cast<size_t>(c) * h * w; }
    float* frame(int ti) { return data.data() + frame_size() * ti; }
    const float* frame(int ti) const { return data.data() + frame_size() * ti; }

    float& at(int ti, int ci, int yi, int xi) {
        return data[((static_cast<size_t>(ti) * c + ci) * h + yi) * w + xi];
    }
    float at(int ti, int ci, int yi, int xi) const {
        return data[((static_cast<size_t>(ti) * c + ci) * h + yi) * w + xi];
    }
};

/// One labeled cell trajectory: the unit of classification.
///
/// `masks` (optional, size T*H*W, 0/1) holds the central-cell ground truth
/// when the trajectory is synthetic, or externally supplied masks otherwise.
/// `valid_length` is an in-memory view length used by end-masking; frames at
/// index >= valid_length are zeroed and treated as padding. It is not
/// serialized and equals frames.t for stored trajectories.
struct Trajectory {
    Video frames;
    Label label = Label::Mitosis;
    std::string traj_id;
    std::string source_id;
    std::vector<uint8_t> masks;  // empty when absent
    int min_length = 11;
    uint64_t generator_seed = 0;
    int valid_length = 0;

    bool has_masks() const { return !masks.empty(); }
    int length() const { return frames.t; }

    const uint8_t* mask(int ti) const {
        return masks.data() + static_cast<size_t>(ti) * frames.h * frames.w;
    }
    uint8_t* mask(int ti) {
        return masks.data() + static_cast<size_t>(ti) * frames.h * frames.w;
    }

    /// Throws Error on any violated type invariant.
    void validate() const {
        if (frames.t < min_length)
            throw Error("trajectory " + traj_id + ": T=" + std::to_string(frames.t) +
                        " below min_length=" + std::to_string(min_length));
        for (float v : frames.data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw Error("trajectory " + traj_id + ": pixel value out of [0,1] or non-finite");
        if (!masks.empty() &&
            masks.size() != static_cast<size_t>(frames.t) * frames.h * frames.w)
            throw Error("trajectory " + traj_id + ": mask shape mismatch");
        if (valid_length < 1 || valid_length > frames.t)
            throw Error("trajectory " + traj_id + ": bad valid_length");
    }
};

}  // namespace tempattn
