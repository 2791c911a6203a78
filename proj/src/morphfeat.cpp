#include "tempattn/morphfeat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tempattn::morphfeat {

namespace {

constexpr double kPi = 3.14159265358979323846;

int64_t gcd64(int64_t a, int64_t b) {
    a = std::abs(a);
    b = std::abs(b);
    while (b) {
        int64_t t = a % b;
        a = b;
        b = t;
    }
    return a;
}

struct Pt {
    int64_t x, y;
};

int64_t cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Andrew monotone chain; returns hull in counter-clockwise order without
/// the repeated first point. Collinear input collapses to its two extremes.
std::vector<Pt> convex_hull(std::vector<Pt> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<Pt> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

/// Boundary pixels: mask pixels with a 4-neighbor outside the region.
std::vector<Pt> boundary_points(const Bitmap& mask) {
    std::vector<Pt> pts;
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x)) continue;
            bool border = x == 0 || x == mask.w - 1 || y == 0 || y == mask.h - 1;
            if (!border) {
                border = !mask.at(y - 1, x) || !mask.at(y + 1, x) || !mask.at(y, x - 1) ||
                         !mask.at(y, x + 1);
            }
            if (border) pts.push_back({x, y});
        }
    }
    return pts;
}

}  // namespace

std::vector<std::string> feature_names(int channels) {
    std::vector<std::string> names = {"area",     "perimeter",   "equiv_diameter",
                                      "eccentricity", "solidity", "circularity"};
    for (int c = 0; c < channels; ++c) names.push_back("intensity_ch" + std::to_string(c));
    return names;
}

LabelImage connected_components(const Bitmap& mask) {
    LabelImage li;
    li.h = mask.h;
    li.w = mask.w;
    li.labels.assign(static_cast<size_t>(mask.h) * mask.w, 0);
    std::vector<int> stack;
    int next = 0;
    for (int i = 0; i < mask.h * mask.w; ++i) {
        if (!mask.px[i] || li.labels[i]) continue;
        ++next;
        stack.push_back(i);
        li.labels[i] = next;
        while (!stack.empty()) {
            int p = stack.back();
            stack.pop_back();
            int y = p / mask.w, x = p % mask.w;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dy && !dx) continue;
                    int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;
                    int q = ny * mask.w + nx;
                    if (mask.px[q] && !li.labels[q]) {
                        li.labels[q] = next;
                        stack.push_back(q);
                    }
                }
            }
        }
    }
    li.n_regions = next;
    return li;
}

std::optional<Bitmap> central_region(const LabelImage& li, double center_x,
                                     double center_y, double radius) {
    if (li.n_regions == 0) return std::nullopt;
    int cy = static_cast<int>(std::lround(center_y));
    int cx = static_cast<int>(std::lround(center_x));
    int chosen = 0;
    if (cy >= 0 && cy < li.h && cx >= 0 && cx < li.w)
        chosen = li.labels[static_cast<size_t>(cy) * li.w + cx];

    if (chosen == 0) {
        // Background at center: nearest region centroid within `radius`.
        std::vector<double> sx(li.n_regions + 1, 0.0), sy(li.n_regions + 1, 0.0);
        std::vector<int64_t> cnt(li.n_regions + 1, 0);
        for (int y = 0; y < li.h; ++y)
            for (int x = 0; x < li.w; ++x) {
                int l = li.labels[static_cast<size_t>(y) * li.w + x];
                if (!l) continue;
                sx[l] += x;
                sy[l] += y;
                ++cnt[l];
            }
        double best = radius;
        for (int l = 1; l <= li.n_regions; ++l) {
            double dx = sx[l] / cnt[l] - center_x;
            double dy = sy[l] / cnt[l] - center_y;
            double d = std::sqrt(dx * dx + dy * dy);
            if (d <= best) {
                best = d;
                chosen = l;
            }
        }
        if (chosen == 0) return std::nullopt;
    }

    Bitmap out(li.h, li.w);
    for (size_t i = 0; i < li.labels.size(); ++i) out.px[i] = li.labels[i] == chosen;
    return out;
}

Moments central_moments(const Bitmap& mask) {
    int64_t n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            if (mask.at(y, x)) {
                ++n;
                sx += x;
                sy += y;
                sxx += static_cast<int64_t>(x) * x;
                syy += static_cast<int64_t>(y) * y;
                sxy += static_cast<int64_t>(x) * y;
            }
    if (n == 0) throw Error("central_moments: empty mask");
    // mu20 = (n*sxx - sx^2) / n^2, exact numerator in wide integers.
    auto second = [n](int64_t spp, int64_t sp, int64_t sq) {
        __int128 num = static_cast<__int128>(n) * spp - static_cast<__int128>(sp) * sq;
        return static_cast<double>(num) / (static_cast<double>(n) * static_cast<double>(n));
    };
    Moments m;
    m.mu00 = static_cast<double>(n);
    m.mu20 = second(sxx, sx, sx);
    m.mu02 = second(syy, sy, sy);
    m.mu11 = second(sxy, sx, sy);
    return m;
}

double chain_perimeter(const Bitmap& mask) {
    // Moore boundary tracing of the outer contour, clockwise, with an
    // explicit backtrack point and Jacob's stopping criterion. Steps are
    // tallied by type and summed once, keeping the value exact under
    // translation and 90° rotation.
    int start = -1;
    for (int i = 0; i < mask.h * mask.w; ++i)
        if (mask.px[i]) {
            start = i;
            break;
        }
    if (start < 0) throw Error("chain_perimeter: empty mask");
    const int sy = start / mask.w, sx = start % mask.w;

    // Clockwise neighbor order in (dy, dx), starting east (screen coords).
    static const int dyx[8][2] = {{0, 1},  {1, 1},   {1, 0},  {1, -1},
                                  {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
    auto fg = [&](int y, int x) {
        return y >= 0 && y < mask.h && x >= 0 && x < mask.w && mask.at(y, x);
    };
    auto dir_to = [&](int fy, int fx, int ty, int tx) {
        for (int d = 0; d < 8; ++d)
            if (fy + dyx[d][0] == ty && fx + dyx[d][1] == tx) return d;
        return 0;
    };

    // West neighbor of the scan-order-first pixel is guaranteed background.
    int cy = sy, cx = sx;
    int by = sy, bx = sx - 1;
    int64_t straight = 0, diagonal = 0;
    int first_dir = -1;
    for (int64_t guard = 0; guard < 8LL * mask.h * mask.w + 16; ++guard) {
        int d0 = dir_to(cy, cx, by, bx);
        int found = -1;
        for (int k = 1; k <= 8; ++k) {
            int d = (d0 + k) % 8;
            if (fg(cy + dyx[d][0], cx + dyx[d][1])) {
                found = d;
                int prev = (d0 + k - 1) % 8;
                by = cy + dyx[prev][0];
                bx = cx + dyx[prev][1];
                break;
            }
        }
        if (found < 0) break;  // isolated pixel, perimeter 0
        if (cy == sy && cx == sx) {
            if (first_dir < 0)
                first_dir = found;
            else if (found == first_dir)
                break;  // about to retrace the first move: contour closed
        }
        cy += dyx[found][0];
        cx += dyx[found][1];
        if (dyx[found][0] != 0 && dyx[found][1] != 0)
            ++diagonal;
        else
            ++straight;
    }
    return static_cast<double>(straight) + static_cast<double>(diagonal) * std::sqrt(2.0);
}

int64_t convex_hull_lattice_count(const Bitmap& mask) {
    std::vector<Pt> pts = boundary_points(mask);
    if (pts.empty()) throw Error("convex_hull_lattice_count: empty mask");
    std::vector<Pt> hull = convex_hull(pts);
    if (hull.size() == 1) return 1;
    if (hull.size() == 2)  // collinear region: lattice points on the segment
        return gcd64(hull[1].x - hull[0].x, hull[1].y - hull[0].y) + 1;

    int64_t twice_area = 0, boundary = 0;
    for (size_t i = 0; i < hull.size(); ++i) {
        const Pt& a = hull[i];
        const Pt& b = hull[(i + 1) % hull.size()];
        twice_area += a.x * b.y - b.x * a.y;
        boundary += gcd64(b.x - a.x, b.y - a.y);
    }
    twice_area = std::abs(twice_area);
    // Pick: lattice points inside-or-on = A + B/2 + 1 = (2A + B)/2 + 1.
    return (twice_area + boundary) / 2 + 1;
}

FeatureVector compute_features(const Bitmap& mask, const float* frame, int channels,
                               int h, int w) {
    if (mask.h != h || mask.w != w) throw Error("compute_features: mask/frame shape mismatch");
    int64_t area = mask.area();
    if (area == 0) throw Error("compute_features: empty mask");

    FeatureVector fv;
    fv.area = static_cast<double>(area);
    fv.perimeter = chain_perimeter(mask);
    fv.equiv_diameter = std::sqrt(4.0 * fv.area / kPi);

    Moments m = central_moments(mask);
    double tr = (m.mu20 + m.mu02) / 2.0;
    double det = std::sqrt(((m.mu20 - m.mu02) / 2.0) * ((m.mu20 - m.mu02) / 2.0) +
                           m.mu11 * m.mu11);
    double l1 = tr + det, l2 = tr - det;
    if (l1 <= 0.0) {
        fv.eccentricity = 0.0;  // single pixel: treat as perfectly round
    } else if (l2 <= 0.0 && area > 1) {
        fv.eccentricity = 1.0 - 1e-9;  // collinear mask convention
        fv.degenerate = true;
    } else {
        fv.eccentricity = std::sqrt(1.0 - l2 / l1);
    }

    fv.solidity = fv.area / static_cast<double>(convex_hull_lattice_count(mask));

    if (fv.perimeter > 0.0) {
        fv.circularity = 4.0 * kPi * fv.area / (fv.perimeter * fv.perimeter);
    } else {
        fv.circularity = 0.0;
        fv.degenerate = true;
    }

    fv.mean_intensity.resize(channels);
    for (int c = 0; c < channels; ++c) {
        double s = 0.0;
        const float* ch = frame + static_cast<size_t>(c) * h * w;
        for (int i = 0; i < h * w; ++i)
            if (mask.px[i]) s += ch[i];
        fv.mean_intensity[c] = s / static_cast<double>(area);
    }
    return fv;
}

void FeatureTable::insert(const std::string& traj_id, int frame, FeatureVector fv) {
    if (channels_ == 0) channels_ = static_cast<int>(fv.mean_intensity.size());
    rows_[Key(traj_id, frame)] = std::move(fv);
}

const FeatureVector* FeatureTable::find(const std::string& traj_id, int frame) const {
    auto it = rows_.find(Key(traj_id, frame));
    return it == rows_.end() ? nullptr : &it->second;
}

}  // namespace tempattn::morphfeat
