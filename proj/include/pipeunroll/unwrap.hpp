#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "pipeunroll/geometry.hpp"
#include "pipeunroll/image.hpp"

namespace pipeunroll {

// Sampling grid on the cylinder surface. Unwrapped images are stored with the
// circumference along the width (column v -> angle) and the pipe axis along
// the height (row u -> z), so row index grows with z.
struct UnwrapGrid {
    int circumference_samples = 1200;  // W
    double axial_resolution_m = 0.0;   // 2*pi*r / W (square pixels)
    double theta0 = deg_to_rad(90.0);  // angular cut position
    long row_start = 0;                // first row on the global axial grid
    int rows = 0;                      // H

    double z_of_row(int u) const { return (row_start + u) * axial_resolution_m; }
    double theta_of_col(int v) const {
        return theta0 + 2.0 * 3.14159265358979323846 * v / circumference_samples;
    }
    void validate() const;
};

// Square-pixel axial resolution for a circumference of W samples.
double axial_resolution(int circumference_samples, const PipeModel &pipe);

// Grid covering z in [z_start, z_end], snapped to the global row lattice.
UnwrapGrid make_grid(int circumference_samples, double theta0, double z_start, double z_end,
                     const PipeModel &pipe);

struct UnwrapConfig {
    int circumference_samples = 1200;
    double theta0 = deg_to_rad(90.0);
    double alpha_max_deg = 88.0;     // near bound: steepest usable incidence
    double min_pixel_ratio = 0.5;    // far bound: image pixels per unwrap pixel
};

// Usable axial window [z_near, z_far] relative to the camera, derived from
// the incidence bound and the resolution rule.
std::pair<double, double> usable_axial_window(const UnwrapConfig &cfg,
                                              const FisheyeIntrinsics &intr, const PipeModel &pipe);

// Grid for one frame: the usable window around the camera's axial position.
UnwrapGrid grid_for_frame(const CameraPose &pose, const UnwrapConfig &cfg,
                          const FisheyeIntrinsics &intr, const PipeModel &pipe);

// Row-major cylinder surface samples; one entry per grid cell.
std::vector<Vec3> sample_points(const UnwrapGrid &grid, const PipeModel &pipe);

struct UnwrapStrip {
    ColorImage pixels;
    Mask valid;  // 0 where back-projection left the circle or field of view
    UnwrapGrid grid;
    int frame_index = 0;

    long row_start() const { return grid.row_start; }
    long row_end() const { return grid.row_start + grid.rows; }  // exclusive
};

// Back-project every grid sample into the fisheye frame and fetch its color
// by bilinear interpolation. Samples outside the field of view or the image
// circle are masked invalid, never invented.
UnwrapStrip unwrap_frame(const ColorImage &frame, const CameraPose &pose,
                         const FisheyeIntrinsics &intr, const PipeModel &pipe,
                         const UnwrapGrid &grid);

// Sidecar header describing a strip PNG (frame index, z range, W, theta0).
void save_strip(const std::filesystem::path &png_path, const UnwrapStrip &strip);

}  // namespace pipeunroll
