#include "pipeunroll/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pipeunroll {

namespace {

Image downsample2(const Image &img) {
    Image out(img.width / 2, img.height / 2);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            out.at(r, c) = 0.25f * (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) +
                                    img.at(2 * r + 1, 2 * c) + img.at(2 * r + 1, 2 * c + 1));
    return out;
}

// Min-eigenvalue corner response of the smoothed structure tensor.
Image corner_response(const Image &smooth, double tensor_sigma) {
    Image gx2(smooth.width, smooth.height, 0.0f);
    Image gy2(smooth.width, smooth.height, 0.0f);
    Image gxy(smooth.width, smooth.height, 0.0f);
    for (int r = 1; r + 1 < smooth.height; ++r) {
        for (int c = 1; c + 1 < smooth.width; ++c) {
            float gx = 0.5f * (smooth.at(r, c + 1) - smooth.at(r, c - 1));
            float gy = 0.5f * (smooth.at(r + 1, c) - smooth.at(r - 1, c));
            gx2.at(r, c) = gx * gx;
            gy2.at(r, c) = gy * gy;
            gxy.at(r, c) = gx * gy;
        }
    }
    gx2 = gaussian_blur(gx2, tensor_sigma);
    gy2 = gaussian_blur(gy2, tensor_sigma);
    gxy = gaussian_blur(gxy, tensor_sigma);
    Image resp(smooth.width, smooth.height, 0.0f);
    for (size_t i = 0; i < resp.data.size(); ++i) {
        double a = gx2.data[i], b = gy2.data[i], c = gxy.data[i];
        double tr = 0.5 * (a + b);
        double det = std::sqrt(std::max(0.0, 0.25 * (a - b) * (a - b) + c * c));
        resp.data[i] = static_cast<float>(tr - det);
    }
    return resp;
}

double parabola_offset(float lo, float mid, float hi) {
    double denom = static_cast<double>(lo) - 2.0 * mid + hi;
    if (denom >= 0.0) return 0.0;  // not a maximum
    return std::clamp(0.5 * (lo - hi) / denom, -0.5, 0.5);
}

// Patch sampling aligned with the radial direction and normalized to surface
// units. For a camera near the pipe axis, the axial image scale at incidence
// angle alpha is proportional to sin^2(alpha) and the circumferential scale
// to the image radius d, so spacing the samples accordingly makes the
// descriptor of a surface patch nearly independent of the camera's axial
// position.
std::vector<float> sample_descriptor(const Image &level_img, const Vec2 &pos_level,
                                     const Vec2 &center_level, double alpha, double alpha_ref,
                                     double d_level, double d_ref_level,
                                     const FeatureConfig &cfg) {
    Vec2 radial = pos_level - center_level;
    double d = radial.norm();
    Vec2 er = d > 1e-9 ? Vec2(radial / d) : Vec2(1.0, 0.0);
    Vec2 et(-er.y(), er.x());

    const double sr = std::sin(alpha) / std::sin(alpha_ref);
    const double spacing_r = cfg.descriptor_spacing * sr * sr;
    const double spacing_t = cfg.descriptor_spacing * (d_level / d_ref_level);

    const int g = cfg.descriptor_grid;
    std::vector<float> desc(static_cast<size_t>(g) * g);
    const double half = (g - 1) / 2.0;
    double mean = 0.0;
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            Vec2 offset = (i - half) * spacing_r * er + (j - half) * spacing_t * et;
            float v = sample_bilinear(level_img, pos_level.x() + offset.x(), pos_level.y() + offset.y());
            desc[static_cast<size_t>(i) * g + j] = v;
            mean += v;
        }
    }
    mean /= desc.size();
    double norm2 = 0.0;
    for (float &v : desc) {
        v -= static_cast<float>(mean);
        norm2 += static_cast<double>(v) * v;
    }
    if (norm2 > 1e-12) {
        float inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (float &v : desc) v *= inv;
    }
    return desc;
}

double descriptor_distance2(const std::vector<float> &a, const std::vector<float> &b, double bail) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
        if (acc > bail) return acc;
    }
    return acc;
}

// Local radial/tangential frame at a position.
struct PolarFrame {
    Vec2 er, et;
};
PolarFrame polar_frame(const Vec2 &pos, const Vec2 &center) {
    Vec2 radial = pos - center;
    const double d = radial.norm();
    Vec2 er = d > 1e-9 ? Vec2(radial / d) : Vec2(1.0, 0.0);
    return {er, Vec2(-er.y(), er.x())};
}

Vec2 polar_displacement(const Match &m, const Vec2 &center) {
    const PolarFrame f = polar_frame(m.pos_a, center);
    const Vec2 disp = m.pos_b - m.pos_a;
    return Vec2(disp.dot(f.er), disp.dot(f.et));
}

// Component-wise median; even counts average the two middle values.
Vec2 median_displacement(std::vector<double> &rs, std::vector<double> &ts) {
    auto med = [](std::vector<double> &v) {
        std::sort(v.begin(), v.end());
        size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    return Vec2(med(rs), med(ts));
}

// Median polar displacement of the k matched features whose frame-a positions
// are nearest to `pos` (excluding `exclude_index_a`). Returns false when no
// neighbor is available.
bool neighborhood_median(const std::vector<Match> &matches, const Vec2 &pos, int exclude_index_a,
                         const FeatureConfig &cfg, Vec2 &out) {
    std::vector<std::pair<double, size_t>> dist;
    dist.reserve(matches.size());
    for (size_t i = 0; i < matches.size(); ++i) {
        if (matches[i].index_a == exclude_index_a) continue;
        dist.emplace_back((matches[i].pos_a - pos).squaredNorm(), i);
    }
    if (dist.empty()) return false;
    size_t use = std::min<size_t>(cfg.neighborhood_k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + use, dist.end());
    std::vector<double> rs, ts;
    rs.reserve(use);
    ts.reserve(use);
    for (size_t i = 0; i < use; ++i) {
        const Vec2 polar = polar_displacement(matches[dist[i].second], cfg.flow_center);
        rs.push_back(polar.x());
        ts.push_back(polar.y());
    }
    out = median_displacement(rs, ts);
    return true;
}

// Drop matches inconsistent with their neighborhood until none remain.
void filter_to_fixed_point(std::vector<Match> &matches, const FeatureConfig &cfg) {
    const double tol2 = cfg.displacement_tol_px * cfg.displacement_tol_px;
    bool removed = true;
    while (removed && !matches.empty()) {
        removed = false;
        std::vector<Match> kept;
        kept.reserve(matches.size());
        for (const Match &m : matches) {
            Vec2 med;
            if (!neighborhood_median(matches, m.pos_a, m.index_a, cfg, med)) {
                kept.push_back(m);
                continue;
            }
            if ((polar_displacement(m, cfg.flow_center) - med).squaredNorm() <= tol2)
                kept.push_back(m);
            else
                removed = true;
        }
        matches = std::move(kept);
    }
}

}  // namespace

std::vector<Feature> detect(const Image &gray, const FisheyeIntrinsics &intr,
                            const FeatureConfig &cfg) {
    if (gray.empty()) throw std::invalid_argument("detect: empty image");
    intr.validate();

    std::vector<Feature> all;
    Image base = gray;
    for (int level = 0; level < cfg.pyramid_levels; ++level) {
        if (base.width < 16 || base.height < 16) break;
        Image smooth = gaussian_blur(base, cfg.detect_sigma);
        Image resp = corner_response(smooth, cfg.tensor_sigma);

        float max_resp = 0.0f;
        for (float v : resp.data) max_resp = std::max(max_resp, v);
        const float threshold = std::max(1e-6f, static_cast<float>(cfg.quality_ratio) * max_resp);
        const double scale = static_cast<double>(1 << level);
        const Vec2 center_level = (intr.center_px + Vec2(0.5, 0.5)) / scale - Vec2(0.5, 0.5);
        const double d_ref =
            0.5 * (cfg.annulus_inner + cfg.annulus_outer) * intr.circle_radius_px();
        const double alpha_ref = angle_from_radius(d_ref, intr);

        for (int r = 1; r + 1 < resp.height; ++r) {
            for (int c = 1; c + 1 < resp.width; ++c) {
                float v = resp.at(r, c);
                if (v < threshold) continue;
                bool is_max = true;
                for (int dr = -1; dr <= 1 && is_max; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        float n = resp.at(r + dr, c + dc);
                        // Strict on earlier neighbors breaks plateau ties.
                        if (n > v || (n == v && (dr < 0 || (dr == 0 && dc < 0)))) {
                            is_max = false;
                            break;
                        }
                    }
                if (!is_max) continue;

                double sub_x = c + parabola_offset(resp.at(r, c - 1), v, resp.at(r, c + 1));
                double sub_y = r + parabola_offset(resp.at(r - 1, c), v, resp.at(r + 1, c));
                Vec2 pos_level(sub_x, sub_y);
                Vec2 pos0 = (pos_level + Vec2(0.5, 0.5)) * scale - Vec2(0.5, 0.5);

                double d = (pos0 - intr.center_px).norm();
                if (d < cfg.annulus_inner * intr.circle_radius_px() ||
                    d > cfg.annulus_outer * intr.circle_radius_px())
                    continue;

                Feature f;
                f.pos_px = pos0;
                f.response = v;
                f.level = level;
                const double alpha = angle_from_radius(std::min(d, intr.circle_radius_px()), intr);
                f.descriptor = sample_descriptor(smooth, pos_level, center_level, alpha, alpha_ref,
                                                 d / scale, d_ref / scale, cfg);
                all.push_back(std::move(f));
            }
        }
        base = downsample2(smooth);
    }

    std::stable_sort(all.begin(), all.end(), [](const Feature &a, const Feature &b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.pos_px.y() != b.pos_px.y()) return a.pos_px.y() < b.pos_px.y();
        if (a.pos_px.x() != b.pos_px.x()) return a.pos_px.x() < b.pos_px.x();
        return a.level < b.level;
    });
    if (static_cast<int>(all.size()) > cfg.max_features) all.resize(cfg.max_features);
    return all;
}

MatchSet match_iterative(const std::vector<Feature> &a, const std::vector<Feature> &b, int rounds,
                         const FeatureConfig &cfg) {
    if (rounds < 1) throw std::invalid_argument("match_iterative: rounds must be >= 1");
    MatchSet out;
    if (a.empty() || b.empty()) return out;

    const double inf = std::numeric_limits<double>::infinity();
    const size_t na = a.size(), nb = b.size();

    // Nearest and second-nearest neighbor in each direction.
    std::vector<int> best_b(na, -1);
    std::vector<double> best_d(na, inf), second_d(na, inf);
    std::vector<int> best_a(nb, -1);
    std::vector<double> best_d_b(nb, inf);
    for (size_t i = 0; i < na; ++i) {
        for (size_t j = 0; j < nb; ++j) {
            double bail = std::max(second_d[i], best_d_b[j]);
            double d2 = descriptor_distance2(a[i].descriptor, b[j].descriptor, bail);
            if (d2 < best_d[i]) {
                second_d[i] = best_d[i];
                best_d[i] = d2;
                best_b[i] = static_cast<int>(j);
            } else if (d2 < second_d[i]) {
                second_d[i] = d2;
            }
            if (d2 < best_d_b[j]) {
                best_d_b[j] = d2;
                best_a[j] = static_cast<int>(i);
            }
        }
    }

    const double ratio2 = cfg.ratio_threshold * cfg.ratio_threshold;
    for (size_t i = 0; i < na; ++i) {
        int j = best_b[i];
        if (j < 0 || best_a[j] != static_cast<int>(i)) continue;
        if (best_d[i] > 0.0 && second_d[i] < inf && best_d[i] > ratio2 * second_d[i]) continue;
        Match m;
        m.index_a = static_cast<int>(i);
        m.index_b = j;
        m.pos_a = a[i].pos_px;
        m.pos_b = b[j].pos_px;
        m.score = std::sqrt(best_d[i]);
        out.pairs.push_back(m);
    }

    const double tol = cfg.displacement_tol_px;
    for (int round = 2; round <= rounds; ++round) {
        // Re-admit unmatched features whose best candidate near the predicted
        // position agrees with the neighborhood displacement.
        std::vector<char> a_used(na, 0), b_used(nb, 0);
        for (const Match &m : out.pairs) {
            a_used[m.index_a] = 1;
            b_used[m.index_b] = 1;
        }
        std::vector<Match> proposals;
        for (size_t i = 0; i < na; ++i) {
            if (a_used[i]) continue;
            Vec2 med;
            if (!neighborhood_median(out.pairs, a[i].pos_px, static_cast<int>(i), cfg, med))
                continue;
            const PolarFrame frame = polar_frame(a[i].pos_px, cfg.flow_center);
            Vec2 predicted = a[i].pos_px + med.x() * frame.er + med.y() * frame.et;
            int best_j = -1;
            double best = cfg.admit_max_distance * cfg.admit_max_distance;
            for (size_t j = 0; j < nb; ++j) {
                if (b_used[j]) continue;
                if ((b[j].pos_px - predicted).norm() > tol) continue;
                double d2 = descriptor_distance2(a[i].descriptor, b[j].descriptor, best);
                if (d2 < best) {
                    best = d2;
                    best_j = static_cast<int>(j);
                }
            }
            if (best_j >= 0) {
                Match m;
                m.index_a = static_cast<int>(i);
                m.index_b = best_j;
                m.pos_a = a[i].pos_px;
                m.pos_b = b[best_j].pos_px;
                m.score = std::sqrt(best);
                proposals.push_back(m);
            }
        }
        std::stable_sort(proposals.begin(), proposals.end(), [](const Match &x, const Match &y) {
            if (x.score != y.score) return x.score < y.score;
            return x.index_a < y.index_a;
        });
        for (const Match &m : proposals) {
            if (b_used[m.index_b]) continue;
            b_used[m.index_b] = 1;
            out.pairs.push_back(m);
        }

        filter_to_fixed_point(out.pairs, cfg);
    }

    std::stable_sort(out.pairs.begin(), out.pairs.end(),
                     [](const Match &x, const Match &y) { return x.index_a < y.index_a; });
    return out;
}

int count_inconsistent(const MatchSet &m, const std::vector<Feature> &, const std::vector<Feature> &,
                       const FeatureConfig &cfg) {
    const double tol2 = cfg.displacement_tol_px * cfg.displacement_tol_px;
    int bad = 0;
    for (const Match &match : m.pairs) {
        Vec2 med;
        if (!neighborhood_median(m.pairs, match.pos_a, match.index_a, cfg, med)) continue;
        if ((polar_displacement(match, cfg.flow_center) - med).squaredNorm() > tol2) ++bad;
    }
    return bad;
}

std::string match_debug_table(const MatchSet &m) {
    std::ostringstream os;
    os << "# frame_a frame_b ua va ub vb score\n";
    for (const Match &p : m.pairs) {
        os << m.frame_a << ' ' << m.frame_b << ' ' << p.pos_a.x() << ' ' << p.pos_a.y() << ' '
           << p.pos_b.x() << ' ' << p.pos_b.y() << ' ' << p.score << '\n';
    }
    return os.str();
}

}  // namespace pipeunroll
