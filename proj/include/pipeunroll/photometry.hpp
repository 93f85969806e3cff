#pragma once

#include <vector>

#include "pipeunroll/image.hpp"
#include "pipeunroll/unwrap.hpp"

namespace pipeunroll {

struct PhotometryConfig {
    double lighting_sigma_px = 15.0;  // low-pass before the column fits
    double trim_retain = 0.7;         // fraction of samples kept after all trim iterations
    int trim_iters = 3;
    // Columns wrap around the circumference and real illumination varies
    // smoothly along it, while trimmed fits select subsets discretely; the
    // fitted parameters are smoothed circularly over this many columns
    // (standard deviation, 0 disables).
    double model_smooth_cols = 8.0;
    double seam_alpha = 1.0;  // weight of the difference image
    double seam_beta = 0.5;   // weight of the transition penalty
    int blend_band_px = 8;
};

// Per-column linear lighting fit L_v(u) = slope * u + intercept plus the
// median offset O_v. Columns follow the unwrap layout: v along the
// circumference, u along the pipe axis.
struct LightingModel {
    std::vector<double> slope;
    std::vector<double> intercept;
    std::vector<double> offset;
    int rows = 0;

    int columns() const { return static_cast<int>(slope.size()); }
};

// Gaussian low-pass, then per column an iteratively trimmed least-squares
// line over the row coordinate; the offset is the median of the blurred
// column. Invalid pixels are excluded from both.
LightingModel estimate_lighting(const Image &gray, const PhotometryConfig &cfg,
                                const Mask *valid = nullptr);

// I*(u,v) = I(u,v) - L_v(u) + O_v on every channel. Values stay unclamped;
// clamping happens once at image output.
ColorImage correct_lighting(const ColorImage &img, const LightingModel &model);
Image correct_lighting(const Image &gray, const LightingModel &model);

// Normalized absolute gray difference over the mutual overlap of two strips,
// in [0, 1]; pixels invalid in either strip cost 1. Row 0 of the result is
// global row max(a.row_start, b.row_start).
Image difference_map(const UnwrapStrip &a, const UnwrapStrip &b);

struct SeamPath {
    std::vector<int> rows;  // one row index per column, within the cost matrix
    double total_cost = 0.0;
};

// Dynamic program over columns: w_{v+1}(u) = alpha*D(u,v+1)
// + min_u' (beta*(u-u')^2/h + w_v(u')), h the height of D. Ties break to the
// smallest row index.
SeamPath optimal_seam(const Image &difference, double alpha, double beta);

struct BlendResult {
    ColorImageD image;
    Mask valid;
    long row_start = 0;
    std::vector<long> seam_rows;  // global seam row per column
};

// Composite of two overlapping strips: the seam decides ownership, and a band
// of blend_band_px rows straddling the seam is solved as a gradient-domain
// least-squares problem with Dirichlet boundaries taken from either side.
// seam.rows are indices into the strips' mutual overlap.
BlendResult poisson_blend(const UnwrapStrip &a, const UnwrapStrip &b, const SeamPath &seam,
                          int band_px);

struct StitchSeam {
    int pair_index = 0;
    std::vector<long> global_rows;  // seam row per column
    double cost = 0.0;
};

struct StitchResult {
    ColorImageD image;
    Mask valid;
    long row_start = 0;
    std::vector<StitchSeam> seams;

    long row_end() const { return row_start + image.height; }
};

// Full enhancement pipeline: per-strip lighting correction, one optimal seam
// per consecutive overlap, Poisson-blended composition.
StitchResult stitch(const std::vector<UnwrapStrip> &strips, const PhotometryConfig &cfg);

// Copy of the stitched image with seams drawn in red.
ColorImageD render_seam_overlay(const StitchResult &result);

}  // namespace pipeunroll
