#include "pipeunroll/unwrap.hpp"

#include <cmath>
#include <fstream>

#include "pipeunroll/png_io.hpp"

namespace pipeunroll {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void UnwrapGrid::validate() const {
    if (circumference_samples < 1)
        throw std::invalid_argument("unwrap grid: circumference_samples must be >= 1");
    if (!(axial_resolution_m > 0.0))
        throw std::invalid_argument("unwrap grid: axial_resolution_m must be positive");
    if (rows < 1) throw std::invalid_argument("unwrap grid: no rows");
}

double axial_resolution(int circumference_samples, const PipeModel &pipe) {
    if (circumference_samples < 1)
        throw std::invalid_argument("axial_resolution: circumference_samples must be >= 1");
    return 2.0 * kPi * pipe.radius_m / circumference_samples;
}

UnwrapGrid make_grid(int circumference_samples, double theta0, double z_start, double z_end,
                     const PipeModel &pipe) {
    if (!(z_end > z_start)) throw std::invalid_argument("make_grid: empty z range");
    UnwrapGrid grid;
    grid.circumference_samples = circumference_samples;
    grid.axial_resolution_m = axial_resolution(circumference_samples, pipe);
    grid.theta0 = theta0;
    grid.row_start = static_cast<long>(std::ceil(z_start / grid.axial_resolution_m));
    const long row_last = static_cast<long>(std::floor(z_end / grid.axial_resolution_m));
    grid.rows = static_cast<int>(row_last - grid.row_start + 1);
    grid.validate();
    return grid;
}

std::pair<double, double> usable_axial_window(const UnwrapConfig &cfg,
                                              const FisheyeIntrinsics &intr, const PipeModel &pipe) {
    const double r = pipe.radius_m;
    const double alpha_max = std::min(deg_to_rad(cfg.alpha_max_deg), intr.fov_rad() / 2.0);
    // Incidence alpha = atan2(r, dz); steep alpha caps how close to the
    // camera plane the surface can be sampled.
    const double z_near = r / std::tan(alpha_max);

    // Axial image resolution |d d / d z| = (D / fov) * r / (r^2 + dz^2)
    // pixels per meter; the far bound keeps at least min_pixel_ratio image
    // pixels per unwrap pixel.
    const double res = axial_resolution(cfg.circumference_samples, pipe);
    const double scale = intr.circle_diameter_px / intr.fov_rad();  // pixels per radian
    const double budget = scale * r * res / cfg.min_pixel_ratio - r * r;
    if (budget <= z_near * z_near)
        throw std::invalid_argument("usable_axial_window: resolution rule leaves no usable band");
    const double z_far = std::sqrt(budget);
    return {z_near, z_far};
}

UnwrapGrid grid_for_frame(const CameraPose &pose, const UnwrapConfig &cfg,
                          const FisheyeIntrinsics &intr, const PipeModel &pipe) {
    auto [z_near, z_far] = usable_axial_window(cfg, intr, pipe);
    return make_grid(cfg.circumference_samples, cfg.theta0, pose.t.z() + z_near,
                     pose.t.z() + z_far, pipe);
}

std::vector<Vec3> sample_points(const UnwrapGrid &grid, const PipeModel &pipe) {
    grid.validate();
    std::vector<Vec3> points;
    points.reserve(static_cast<size_t>(grid.rows) * grid.circumference_samples);
    for (int u = 0; u < grid.rows; ++u) {
        const double z = grid.z_of_row(u);
        for (int v = 0; v < grid.circumference_samples; ++v) {
            const double theta = grid.theta_of_col(v);
            points.emplace_back(pipe.radius_m * std::cos(theta), pipe.radius_m * std::sin(theta), z);
        }
    }
    return points;
}

UnwrapStrip unwrap_frame(const ColorImage &frame, const CameraPose &pose,
                         const FisheyeIntrinsics &intr, const PipeModel &pipe,
                         const UnwrapGrid &grid) {
    grid.validate();
    pose.validate();
    UnwrapStrip strip;
    strip.grid = grid;
    strip.pixels = ColorImage(grid.circumference_samples, grid.rows, Pixel{0, 0, 0});
    strip.valid = Mask(grid.circumference_samples, grid.rows, 0);

    const double circle_r = intr.circle_radius_px();
    for (int u = 0; u < grid.rows; ++u) {
        const double z = grid.z_of_row(u);
        for (int v = 0; v < grid.circumference_samples; ++v) {
            const double theta = grid.theta_of_col(v);
            const Vec3 p(pipe.radius_m * std::cos(theta), pipe.radius_m * std::sin(theta), z);
            Vec2 px;
            try {
                px = project(p, pose, intr);
            } catch (const std::domain_error &) {
                continue;  // outside the field of view
            }
            if ((px - intr.center_px).norm() > circle_r) continue;
            strip.pixels.at(u, v) = sample_bilinear(frame, px.x(), px.y());
            strip.valid.at(u, v) = 1;
        }
    }
    return strip;
}

void save_strip(const std::filesystem::path &png_path, const UnwrapStrip &strip) {
    write_png_rgb8(png_path, strip.pixels);
    std::filesystem::path header = png_path;
    header.replace_extension(".txt");
    std::ofstream out(header);
    if (!out) throw IoError("save_strip: cannot open " + header.string());
    out << "frame_index " << strip.frame_index << '\n';
    out << "circumference_samples " << strip.grid.circumference_samples << '\n';
    out << "theta0_rad " << strip.grid.theta0 << '\n';
    out << "axial_resolution_m " << strip.grid.axial_resolution_m << '\n';
    out << "z_start_m " << strip.grid.z_of_row(0) << '\n';
    out << "z_end_m " << strip.grid.z_of_row(strip.grid.rows - 1) << '\n';
}

}  // namespace pipeunroll
