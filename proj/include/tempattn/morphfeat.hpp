#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tempattn/common.hpp"

namespace tempattn::morphfeat {

/// Binary region mask on the patch grid.
struct Bitmap {
    int h = 0, w = 0;
    std::vector<uint8_t> px;

    Bitmap() = default;
    Bitmap(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, 0) {}
    uint8_t at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
    uint8_t& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
    int64_t area() const {
        int64_t n = 0;
        for (uint8_t v : px) n += (v != 0);
        return n;
    }
};

/// Central moments about the pixel-coordinate centroid, normalized by area
/// (mu20 = E[(x-x̄)²] etc., x = column, y = row). Accumulated in integer
/// arithmetic so translations and 90° rotations are bit-exact.
struct Moments {
    double mu00 = 0.0;
    double mu20 = 0.0;
    double mu02 = 0.0;
    double mu11 = 0.0;
};

struct FeatureVector {
    double area = 0.0;
    double perimeter = 0.0;
    double equiv_diameter = 0.0;
    double eccentricity = 0.0;
    double solidity = 0.0;
    double circularity = 0.0;
    std::vector<double> mean_intensity;  // one per channel
    bool degenerate = false;             // collinear mask or zero perimeter
};

/// Fixed column order of the feature table CSV (intensities appended).
std::vector<std::string> feature_names(int channels);

/// 8-connected component labelling; labels are 1..n_regions, 0 = background.
struct LabelImage {
    int h = 0, w = 0;
    int n_regions = 0;
    std::vector<int32_t> labels;
};

LabelImage connected_components(const Bitmap& mask);

/// Region selection per the central-cell rule: the region containing the
/// center pixel, else the region whose centroid lies nearest the center
/// within `radius` pixels, else nothing.
std::optional<Bitmap> central_region(const LabelImage& li, double center_x,
                                     double center_y, double radius = 8.0);

Moments central_moments(const Bitmap& mask);

/// Full per-frame feature vector. `frame` is [C, H, W] row-major matching the
/// mask dimensions. Throws on an empty mask or dimension mismatch.
FeatureVector compute_features(const Bitmap& mask, const float* frame, int channels,
                               int h, int w);

/// Chain-code perimeter of the outer boundary: straight steps weigh 1,
/// diagonal steps sqrt(2). A single-pixel region has perimeter 0.
double chain_perimeter(const Bitmap& mask);

/// Number of lattice points inside-or-on the convex hull of the region's
/// boundary pixel centers (shoelace + Pick correction, exact in integers).
int64_t convex_hull_lattice_count(const Bitmap& mask);

/// Rows keyed by (traj_id, frame_index); missing rows permitted.
class FeatureTable {
public:
    using Key = std::pair<std::string, int>;

    void insert(const std::string& traj_id, int frame, FeatureVector fv);
    const FeatureVector* find(const std::string& traj_id, int frame) const;
    size_t size() const { return rows_.size(); }
    const std::map<Key, FeatureVector>& rows() const { return rows_; }
    int channels() const { return channels_; }

private:
    std::map<Key, FeatureVector> rows_;
    int channels_ = 0;
};

}  // namespace tempattn::morphfeat
