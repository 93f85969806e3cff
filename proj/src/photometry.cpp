#include "pipeunroll/photometry.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pipeunroll {

namespace {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit fit_line(const std::vector<std::pair<int, double>> &samples) {
    const double n = static_cast<double>(samples.size());
    if (samples.size() < 2) {
        double mean = samples.empty() ? 0.0 : samples[0].second;
        return {0.0, mean};
    }
    double su = 0, suu = 0, sy = 0, suy = 0;
    for (const auto &[u, y] : samples) {
        su += u;
        suu += static_cast<double>(u) * u;
        sy += y;
        suy += u * y;
    }
    const double denom = n * suu - su * su;
    if (denom == 0.0) return {0.0, sy / n};
    LineFit fit;
    fit.slope = (n * suy - su * sy) / denom;
    fit.intercept = (sy - fit.slope * su) / n;
    return fit;
}

// Circular Gaussian smoothing of per-column model parameters.
void smooth_circular(std::vector<double> &values, double sigma) {
    if (sigma <= 0.0 || values.size() < 3) return;
    const int n = static_cast<int>(values.size());
    const int radius = std::min(n / 2, std::max(1, static_cast<int>(std::ceil(3.0 * sigma))));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double &k : kernel) k /= sum;
    std::vector<double> out(values.size());
    for (int v = 0; v < n; ++v) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
            acc += kernel[i + radius] * values[((v + i) % n + n) % n];
        out[v] = acc;
    }
    values = std::move(out);
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LightingModel estimate_lighting(const Image &gray, const PhotometryConfig &cfg, const Mask *valid) {
    if (gray.height < 4)
        throw std::invalid_argument("estimate_lighting: image height must be at least 4");
    const Grid<double> blurred = gaussian_blur_double(gray, cfg.lighting_sigma_px, valid);

    LightingModel model;
    model.rows = gray.height;
    model.slope.resize(gray.width, 0.0);
    model.intercept.resize(gray.width, 0.0);
    model.offset.resize(gray.width, 0.0);

    // Per trim iteration keep retain^(1/iters) so the configured fraction
    // survives overall.
    const double keep_per_iter =
        cfg.trim_iters > 0 ? std::pow(cfg.trim_retain, 1.0 / cfg.trim_iters) : 1.0;

    for (int v = 0; v < gray.width; ++v) {
        std::vector<std::pair<int, double>> all;
        std::vector<double> column;
        all.reserve(gray.height);
        for (int u = 0; u < gray.height; ++u) {
            if (valid && !valid->at(u, v)) continue;
            all.emplace_back(u, blurred.at(u, v));
            column.push_back(blurred.at(u, v));
        }
        if (all.empty()) continue;

        // Select the `keep` samples with the smallest residuals against the
        // current fit, in deterministic (residual, row) order.
        auto select = [&](const std::vector<std::pair<int, double>> &from, const LineFit &fit,
                          size_t keep) {
            std::vector<std::pair<double, size_t>> ranked(from.size());
            for (size_t i = 0; i < from.size(); ++i)
                ranked[i] = {std::abs(from[i].second - (fit.slope * from[i].first + fit.intercept)),
                             i};
            std::nth_element(ranked.begin(), ranked.begin() + (keep - 1), ranked.end());
            std::vector<char> take(from.size(), 0);
            for (size_t i = 0; i < keep; ++i) take[ranked[i].second] = 1;
            std::vector<std::pair<int, double>> out;
            out.reserve(keep);
            for (size_t i = 0; i < from.size(); ++i)
                if (take[i]) out.push_back(from[i]);
            return out;
        };

        std::vector<std::pair<int, double>> samples = all;
        LineFit fit = fit_line(samples);
        for (int it = 0; it < cfg.trim_iters && samples.size() > 2; ++it) {
            const size_t keep = std::max<size_t>(
                2, static_cast<size_t>(std::lround(keep_per_iter * samples.size())));
            samples = select(samples, fit, std::min(keep, samples.size()));
            fit = fit_line(samples);
        }
        // Concentration steps at the final retention: re-select from all rows
        // against the latest fit until the choice stabilizes. This undoes the
        // tilt a contaminated initial fit can leave behind.
        const size_t retained = std::max<size_t>(2, samples.size());
        for (int it = 0; it < 25; ++it) {
            std::vector<std::pair<int, double>> next =
                select(all, fit, std::min(retained, all.size()));
            const LineFit refit = fit_line(next);
            const bool stable = next == samples;
            samples = std::move(next);
            fit = refit;
            if (stable) break;
        }
        model.slope[v] = fit.slope;
        model.intercept[v] = fit.intercept;
        model.offset[v] = median_of(column);
    }
    smooth_circular(model.slope, cfg.model_smooth_cols);
    smooth_circular(model.intercept, cfg.model_smooth_cols);
    smooth_circular(model.offset, cfg.model_smooth_cols);
    return model;
}

ColorImage correct_lighting(const ColorImage &img, const LightingModel &model) {
    if (model.columns() != img.width)
        throw std::invalid_argument("correct_lighting: model column count does not match image");
    ColorImage out(img.width, img.height);
    for (int u = 0; u < img.height; ++u) {
        for (int v = 0; v < img.width; ++v) {
            const double shift = model.offset[v] - (model.slope[v] * u + model.intercept[v]);
            const Pixel &p = img.at(u, v);
            out.at(u, v) = {static_cast<float>(p[0] + shift), static_cast<float>(p[1] + shift),
                            static_cast<float>(p[2] + shift)};
        }
    }
    return out;
}

Image correct_lighting(const Image &gray, const LightingModel &model) {
    if (model.columns() != gray.width)
        throw std::invalid_argument("correct_lighting: model column count does not match image");
    Image out(gray.width, gray.height);
    for (int u = 0; u < gray.height; ++u)
        for (int v = 0; v < gray.width; ++v)
            out.at(u, v) = static_cast<float>(gray.at(u, v) + model.offset[v] -
                                              (model.slope[v] * u + model.intercept[v]));
    return out;
}

Image difference_map(const UnwrapStrip &a, const UnwrapStrip &b) {
    if (a.pixels.width != b.pixels.width)
        throw std::invalid_argument("difference_map: strip widths differ");
    const long lo = std::max(a.row_start(), b.row_start());
    const long hi = std::min(a.row_end(), b.row_end());
    if (hi <= lo) throw std::invalid_argument("difference_map: empty overlap");

    Image diff(a.pixels.width, static_cast<int>(hi - lo));
    for (long u = lo; u < hi; ++u) {
        const int ua = static_cast<int>(u - a.row_start());
        const int ub = static_cast<int>(u - b.row_start());
        for (int v = 0; v < a.pixels.width; ++v) {
            if (!a.valid.at(ua, v) || !b.valid.at(ub, v)) {
                diff.at(static_cast<int>(u - lo), v) = 1.0f;
                continue;
            }
            const float ga = luminance(a.pixels.at(ua, v));
            const float gb = luminance(b.pixels.at(ub, v));
            diff.at(static_cast<int>(u - lo), v) = std::abs(ga - gb) / 255.0f;
        }
    }
    return diff;
}

SeamPath optimal_seam(const Image &difference, double alpha, double beta) {
    if (difference.empty()) throw std::invalid_argument("optimal_seam: empty cost matrix");
    if (alpha < 0.0 || beta < 0.0)
        throw std::invalid_argument("optimal_seam: weights must be non-negative");
    const int h = difference.height;
    const int w = difference.width;
    const double hd = static_cast<double>(h);

    std::vector<double> prev(h), cur(h);
    Grid<int> arg(w, h, 0);
    for (int u = 0; u < h; ++u) prev[u] = alpha * difference.at(u, 0);

    for (int v = 1; v < w; ++v) {
        for (int u = 0; u < h; ++u) {
            double best = std::numeric_limits<double>::infinity();
            int best_u = 0;
            for (int up = 0; up < h; ++up) {
                const double du = static_cast<double>(u - up);
                const double cand = beta * (du * du) / hd + prev[up];
                if (cand < best) {
                    best = cand;
                    best_u = up;
                }
            }
            cur[u] = alpha * difference.at(u, v) + best;
            arg.at(u, v) = best_u;
        }
        std::swap(prev, cur);
    }

    SeamPath path;
    path.rows.resize(w);
    int u = 0;
    for (int cand = 1; cand < h; ++cand)
        if (prev[cand] < prev[u]) u = cand;
    path.total_cost = prev[u];
    for (int v = w - 1; v >= 0; --v) {
        path.rows[v] = u;
        if (v > 0) u = arg.at(u, v);
    }
    return path;
}

namespace {

// Gradient-domain solve of the band straddling the seam, per channel. Sources
// come from the owning strip on each side; Dirichlet values sit one row above
// and below the band.
void blend_band_inplace(ColorImageD &canvas, long canvas_row_start, const UnwrapStrip &a,
                        const UnwrapStrip &b, const std::vector<long> &seam_global, int band_px) {
    const int w = canvas.width;
    if (static_cast<int>(seam_global.size()) != w)
        throw std::invalid_argument("blend: seam width does not match canvas");
    if (band_px < 1) throw std::invalid_argument("blend: band must be at least one pixel");

    std::vector<long> lo(w);
    for (int v = 0; v < w; ++v) {
        lo[v] = seam_global[v] - band_px / 2;
        const long top_boundary = lo[v] - 1;
        const long bottom_boundary = lo[v] + band_px;
        if (top_boundary < std::max(a.row_start(), b.row_start()) ||
            bottom_boundary >= std::min(a.row_end(), b.row_end()))
            throw std::invalid_argument("blend: band exceeds overlap");
    }

    auto unknown_id = [&](long u, int v) -> int {
        if (v < 0 || v >= w) return -1;
        const long i = u - lo[v];
        if (i < 0 || i >= band_px) return -1;
        return v * band_px + static_cast<int>(i);
    };
    auto aval = [&](long u, int v, int ch) {
        return static_cast<double>(a.pixels.at(static_cast<int>(u - a.row_start()), v)[ch]);
    };
    auto bval = [&](long u, int v, int ch) {
        return static_cast<double>(b.pixels.at(static_cast<int>(u - b.row_start()), v)[ch]);
    };
    auto composite = [&](long u, int v, int ch) {
        return u <= seam_global[v] ? aval(u, v, ch) : bval(u, v, ch);
    };

    const int num_unknown = w * band_px;
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<Eigen::Triplet<double>> triplets;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(num_unknown);

        auto add_edge = [&](long u_p, int v_p, long u_q, int v_q, double g) {
            const int p = unknown_id(u_p, v_p);
            const int q = unknown_id(u_q, v_q);
            if (p < 0 && q < 0) return;
            if (p >= 0 && q >= 0) {
                triplets.emplace_back(p, p, 1.0);
                triplets.emplace_back(q, q, 1.0);
                triplets.emplace_back(p, q, -1.0);
                triplets.emplace_back(q, p, -1.0);
                rhs[p] += g;
                rhs[q] -= g;
            } else if (p >= 0) {
                triplets.emplace_back(p, p, 1.0);
                rhs[p] += composite(u_q, v_q, ch) + g;
            } else {
                triplets.emplace_back(q, q, 1.0);
                rhs[q] += composite(u_p, v_p, ch) - g;
            }
        };
        // Target gradient for the edge (p above/left of q): the owning side's
        // source gradient, averaged when the edge crosses the seam.
        auto source_gradient = [&](long u_p, int v_p, long u_q, int v_q) {
            const bool p_above = u_p <= seam_global[v_p];
            const bool q_above = u_q <= seam_global[v_q];
            if (p_above && q_above) return aval(u_p, v_p, ch) - aval(u_q, v_q, ch);
            if (!p_above && !q_above) return bval(u_p, v_p, ch) - bval(u_q, v_q, ch);
            return 0.5 * ((aval(u_p, v_p, ch) - aval(u_q, v_q, ch)) +
                          (bval(u_p, v_p, ch) - bval(u_q, v_q, ch)));
        };

        for (int v = 0; v < w; ++v) {
            for (long u = lo[v] - 1; u < lo[v] + band_px; ++u)
                add_edge(u, v, u + 1, v, source_gradient(u, v, u + 1, v));
            if (v + 1 < w) {
                const long span_lo = std::min(lo[v], lo[v + 1]);
                const long span_hi = std::max(lo[v] + band_px, lo[v + 1] + band_px);
                for (long u = span_lo; u < span_hi; ++u) {
                    if (unknown_id(u, v) < 0 && unknown_id(u, v + 1) < 0) continue;
                    add_edge(u, v, u, v + 1, source_gradient(u, v, u, v + 1));
                }
            }
        }

        Eigen::SparseMatrix<double> h(num_unknown, num_unknown);
        h.setFromTriplets(triplets.begin(), triplets.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("blend: band system factorization failed");
        Eigen::VectorXd x = solver.solve(rhs);

        for (int v = 0; v < w; ++v) {
            for (int i = 0; i < band_px; ++i) {
                const long u = lo[v] + i;
                canvas.at(static_cast<int>(u - canvas_row_start), v)[ch] = x[v * band_px + i];
            }
        }
    }
}

}  // namespace

BlendResult poisson_blend(const UnwrapStrip &a, const UnwrapStrip &b, const SeamPath &seam,
                          int band_px) {
    if (a.pixels.width != b.pixels.width)
        throw std::invalid_argument("poisson_blend: strip widths differ");
    const long overlap_start = std::max(a.row_start(), b.row_start());
    if (std::min(a.row_end(), b.row_end()) <= overlap_start)
        throw std::invalid_argument("poisson_blend: empty overlap");
    if (static_cast<int>(seam.rows.size()) != a.pixels.width)
        throw std::invalid_argument("poisson_blend: seam width does not match strips");

    BlendResult out;
    out.row_start = std::min(a.row_start(), b.row_start());
    const long row_end = std::max(a.row_end(), b.row_end());
    const int height = static_cast<int>(row_end - out.row_start);
    out.image = ColorImageD(a.pixels.width, height, PixelD{0, 0, 0});
    out.valid = Mask(a.pixels.width, height, 0);
    out.seam_rows.resize(a.pixels.width);

    for (int v = 0; v < a.pixels.width; ++v) {
        const long s = overlap_start + seam.rows[v];
        out.seam_rows[v] = s;
        for (long u = out.row_start; u < row_end; ++u) {
            const bool use_a = (u <= s && u >= a.row_start() && u < a.row_end()) ||
                               (u < b.row_start());
            const int row = static_cast<int>(u - out.row_start);
            if (use_a) {
                const Pixel &p = a.pixels.at(static_cast<int>(u - a.row_start()), v);
                out.image.at(row, v) = {p[0], p[1], p[2]};
                out.valid.at(row, v) = a.valid.at(static_cast<int>(u - a.row_start()), v);
            } else if (u >= b.row_start() && u < b.row_end()) {
                const Pixel &p = b.pixels.at(static_cast<int>(u - b.row_start()), v);
                out.image.at(row, v) = {p[0], p[1], p[2]};
                out.valid.at(row, v) = b.valid.at(static_cast<int>(u - b.row_start()), v);
            }
        }
    }
    blend_band_inplace(out.image, out.row_start, a, b, out.seam_rows, band_px);
    return out;
}

StitchResult stitch(const std::vector<UnwrapStrip> &strips, const PhotometryConfig &cfg) {
    if (strips.empty()) throw std::invalid_argument("stitch: no strips");
    const int w = strips[0].pixels.width;
    for (size_t k = 0; k < strips.size(); ++k) {
        if (strips[k].pixels.width != w)
            throw std::invalid_argument("stitch: strip widths differ");
        if (k > 0 && strips[k].row_start() <= strips[k - 1].row_start())
            throw std::invalid_argument("stitch: strips must be ordered by z");
    }

    // Step 1: per-strip lighting correction.
    std::vector<UnwrapStrip> corrected;
    corrected.reserve(strips.size());
    for (const UnwrapStrip &s : strips) {
        LightingModel model = estimate_lighting(to_gray(s.pixels), cfg, &s.valid);
        UnwrapStrip c = s;
        c.pixels = correct_lighting(s.pixels, model);
        corrected.push_back(std::move(c));
    }

    StitchResult result;
    result.row_start = corrected.front().row_start();
    const long row_end = corrected.back().row_end();
    result.image = ColorImageD(w, static_cast<int>(row_end - result.row_start), PixelD{0, 0, 0});
    result.valid = Mask(w, static_cast<int>(row_end - result.row_start), 0);

    auto paint = [&](const UnwrapStrip &s, long from_row, long to_row, int v) {
        for (long u = std::max(from_row, s.row_start()); u < std::min(to_row, s.row_end()); ++u) {
            const Pixel &p = s.pixels.at(static_cast<int>(u - s.row_start()), v);
            result.image.at(static_cast<int>(u - result.row_start), v) = {p[0], p[1], p[2]};
            result.valid.at(static_cast<int>(u - result.row_start), v) =
                s.valid.at(static_cast<int>(u - s.row_start()), v);
        }
    };
    for (int v = 0; v < w; ++v) paint(corrected[0], corrected[0].row_start(), row_end, v);

    // Steps 2 and 3 per consecutive overlap: optimal seam, then blending.
    // Seam windows must nest inside each pair's overlap with room for the
    // blend band, and consecutive seams must stay ordered with disjoint
    // bands; a forward/backward pass distributes crowded overlaps.
    const int band = cfg.blend_band_px;
    const long min_gap = band + 2;
    const size_t num_seams = corrected.size() - 1;
    std::vector<long> seam_lo(num_seams), seam_hi(num_seams);
    for (size_t k = 0; k < num_seams; ++k) {
        const long ov_start = corrected[k + 1].row_start();
        const long ov_end = std::min(corrected[k].row_end(), corrected[k + 1].row_end());
        if (ov_end <= ov_start)
            throw std::invalid_argument("stitch: strips " + std::to_string(k) + " and " +
                                        std::to_string(k + 1) + " do not overlap");
        seam_lo[k] = ov_start + band / 2 + 1;
        seam_hi[k] = ov_end - 1 - (band - band / 2) - 1;  // inclusive
    }
    for (size_t k = 1; k < num_seams; ++k)
        seam_lo[k] = std::max(seam_lo[k], seam_lo[k - 1] + min_gap);
    for (size_t k = num_seams; k-- > 1;)
        seam_hi[k - 1] = std::min(seam_hi[k - 1], seam_hi[k] - min_gap);
    for (size_t k = 0; k < num_seams; ++k)
        if (seam_hi[k] < seam_lo[k])
            throw std::invalid_argument("stitch: overlap between strips " + std::to_string(k) +
                                        " and " + std::to_string(k + 1) +
                                        " is too small for the blend band");

    for (size_t k = 0; k + 1 < corrected.size(); ++k) {
        const UnwrapStrip &a = corrected[k];
        const UnwrapStrip &b = corrected[k + 1];
        const long ov_start = b.row_start();

        Image diff = difference_map(a, b);
        Image windowed(w, static_cast<int>(seam_hi[k] - seam_lo[k] + 1));
        for (long u = seam_lo[k]; u <= seam_hi[k]; ++u)
            for (int v = 0; v < w; ++v)
                windowed.at(static_cast<int>(u - seam_lo[k]), v) =
                    diff.at(static_cast<int>(u - ov_start), v);

        SeamPath seam = optimal_seam(windowed, cfg.seam_alpha, cfg.seam_beta);

        StitchSeam ss;
        ss.pair_index = static_cast<int>(k);
        ss.cost = seam.total_cost;
        ss.global_rows.resize(w);
        for (int v = 0; v < w; ++v) {
            ss.global_rows[v] = seam_lo[k] + seam.rows[v];
            paint(b, ss.global_rows[v] + 1, row_end, v);
        }
        blend_band_inplace(result.image, result.row_start, a, b, ss.global_rows, band);
        result.seams.push_back(std::move(ss));
    }
    return result;
}

ColorImageD render_seam_overlay(const StitchResult &result) {
    ColorImageD out = result.image;
    for (const StitchSeam &seam : result.seams) {
        for (int v = 0; v < out.width; ++v) {
            const long u = seam.global_rows[v] - result.row_start;
            if (u >= 0 && u < out.height) out.at(static_cast<int>(u), v) = PixelD{255.0, 0.0, 0.0};
        }
    }
    return out;
}

}  // namespace pipeunroll
