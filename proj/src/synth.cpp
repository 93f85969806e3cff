#include "pipeunroll/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pipeunroll {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Lattice value in [-1, 1), periodic in the angular index.
double lattice(std::uint64_t seed, long ix, long iy, int octave, long period_theta) {
    const long wrapped = ((ix % period_theta) + period_theta) % period_theta;
    std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(wrapped) + 0x100000001ULL *
                                                                                   octave));
    h = mix64(h ^ static_cast<std::uint64_t>(iy));
    return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const SyntheticScene &scene, double theta, double z) {
    double total = 0.0, weight = 0.0, amp = 1.0;
    for (int o = 0; o < scene.noise_octaves; ++o) {
        const double cell = scene.noise_scale_m * static_cast<double>(1 << (scene.noise_octaves - 1 - o));
        const long period = std::max<long>(1, std::lround(2.0 * kPi * scene.pipe.radius_m / cell));
        const double x = theta / (2.0 * kPi) * static_cast<double>(period);
        const double y = z / cell;
        const long ix = static_cast<long>(std::floor(x));
        const long iy = static_cast<long>(std::floor(y));
        const double fx = smoothstep(x - ix);
        const double fy = smoothstep(y - iy);
        const double v00 = lattice(scene.seed, ix, iy, o, period);
        const double v10 = lattice(scene.seed, ix + 1, iy, o, period);
        const double v01 = lattice(scene.seed, ix, iy + 1, o, period);
        const double v11 = lattice(scene.seed, ix + 1, iy + 1, o, period);
        const double v = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
        total += amp * v;
        weight += amp;
        amp *= 0.5;
    }
    return total / weight;
}

double wrap_angle_diff(double a, double b) {
    double d = std::fmod(a - b, 2.0 * kPi);
    if (d > kPi) d -= 2.0 * kPi;
    if (d < -kPi) d += 2.0 * kPi;
    return d;
}

const Decal *decal_at(const SyntheticScene &scene, double theta, double z) {
    for (const Decal &d : scene.decals) {
        if (std::abs(wrap_angle_diff(theta, d.theta_rad)) <= d.extent_theta_rad / 2.0 &&
            std::abs(z - d.z_m) <= d.extent_z_m / 2.0)
            return &d;
    }
    return nullptr;
}

}  // namespace

void SyntheticScene::validate() const {
    pipe.validate();
    if (noise_octaves < 1) throw std::invalid_argument("scene: noise_octaves must be >= 1");
    if (!(noise_scale_m > 0.0)) throw std::invalid_argument("scene: noise_scale_m must be positive");
    if (!(checker_period_m > 0.0))
        throw std::invalid_argument("scene: checker_period_m must be positive");
    for (const Decal &d : decals) {
        if (d.z_m - d.extent_z_m / 2.0 < 0.0 || d.z_m + d.extent_z_m / 2.0 > pipe.length_m)
            throw std::invalid_argument("scene: decal extends beyond the pipe");
        if (d.label == LabelClass::Background)
            throw std::invalid_argument("scene: decals cannot carry the background class");
    }
}

double texture_value(const SyntheticScene &scene, double theta, double z) {
    double v;
    if (scene.texture == TextureKind::Checker) {
        const long n_theta =
            std::max<long>(1, std::lround(2.0 * kPi * scene.pipe.radius_m / scene.checker_period_m));
        const double cell_theta = 2.0 * kPi / static_cast<double>(n_theta);
        const long a = static_cast<long>(std::floor(theta / cell_theta));
        const long b = static_cast<long>(std::floor(z / scene.checker_period_m));
        const long parity = ((a + b) % 2 + 2) % 2;
        v = scene.base_gray + (parity == 0 ? 0.5 : -0.5) * scene.checker_contrast;
    } else {
        v = scene.base_gray + scene.noise_amplitude * value_noise(scene, theta, z);
    }
    if (decal_at(scene, theta, z) != nullptr) v *= (1.0 - scene.decal_darken);
    return v;
}

Pixel shade(double value) {
    const double v = std::max(0.0, value);
    return Pixel{static_cast<float>(v), static_cast<float>(v * 0.97), static_cast<float>(v * 0.92)};
}

std::pair<std::vector<ColorImage>, GroundTruth> render_sequence(const SyntheticScene &scene,
                                                                const Trajectory &trajectory,
                                                                const FisheyeIntrinsics &intr,
                                                                const UnwrapConfig &unwrap_cfg) {
    scene.validate();
    intr.validate();
    if (trajectory.poses.empty()) throw std::invalid_argument("render_sequence: empty trajectory");
    for (const CameraPose &pose : trajectory.poses) {
        if (std::hypot(pose.t.x(), pose.t.y()) >= scene.pipe.radius_m)
            throw std::invalid_argument("render_sequence: pose outside the cylinder");
    }

    const int w = static_cast<int>(intr.image_size_px.x());
    const int h = static_cast<int>(intr.image_size_px.y());
    const double circle_r = intr.circle_radius_px();

    std::vector<ColorImage> frames;
    frames.reserve(trajectory.poses.size());
    for (const CameraPose &pose : trajectory.poses) {
        ColorImage frame(w, h, Pixel{0, 0, 0});
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double ox = x - intr.center_px.x();
                const double oy = y - intr.center_px.y();
                const double d = std::hypot(ox, oy);
                if (d > circle_r) continue;
                Vec3 dir_cam;
                if (d < 1e-9) {
                    dir_cam = Vec3(0, 0, 1);
                } else {
                    const double alpha = angle_from_radius(d, intr);
                    dir_cam = Vec3(ox, oy, d / std::tan(alpha));
                }
                CylinderHit hit;
                try {
                    hit = intersect_cylinder(Ray{pose.t, pose.R * dir_cam}, scene.pipe);
                } catch (const std::runtime_error &) {
                    continue;  // looking straight along the axis
                }
                const double theta = std::atan2(hit.point.y(), hit.point.x());
                double value = texture_value(scene, theta, hit.point.z());
                if (scene.lighting.slope != 0.0) {
                    const double dist = (hit.point - pose.t).norm();
                    value *= std::max(0.0, 1.0 - scene.lighting.slope * (dist - scene.lighting.dist0_m));
                }
                frame.at(y, x) = shade(value);
            }
        }
        frames.push_back(std::move(frame));
    }

    // Ideal unwrap and label mask on the grid covering every frame's window.
    auto [z_near, z_far] = usable_axial_window(unwrap_cfg, intr, scene.pipe);
    double z_lo = trajectory.poses.front().t.z() + z_near;
    double z_hi = trajectory.poses.front().t.z() + z_far;
    for (const CameraPose &pose : trajectory.poses) {
        z_lo = std::min(z_lo, pose.t.z() + z_near);
        z_hi = std::max(z_hi, pose.t.z() + z_far);
    }

    GroundTruth gt;
    gt.trajectory = trajectory;
    gt.unwrap_grid = make_grid(unwrap_cfg.circumference_samples, unwrap_cfg.theta0, z_lo, z_hi,
                               scene.pipe);
    gt.ideal_unwrap = ColorImage(gt.unwrap_grid.circumference_samples, gt.unwrap_grid.rows);
    gt.label_mask = Mask(gt.unwrap_grid.circumference_samples, gt.unwrap_grid.rows, 0);
    for (int u = 0; u < gt.unwrap_grid.rows; ++u) {
        const double z = gt.unwrap_grid.z_of_row(u);
        for (int v = 0; v < gt.unwrap_grid.circumference_samples; ++v) {
            const double theta = gt.unwrap_grid.theta_of_col(v);
            gt.ideal_unwrap.at(u, v) = shade(texture_value(scene, theta, z));
            if (const Decal *d = decal_at(scene, theta, z))
                gt.label_mask.at(u, v) = static_cast<std::uint8_t>(d->label);
        }
    }
    return {std::move(frames), std::move(gt)};
}

Trajectory perturbed_trajectory(int frames, double spacing_m, double jitter_t_m,
                                double jitter_rot_rad, std::uint64_t seed, const PipeModel &pipe) {
    if (frames < 1) throw std::invalid_argument("perturbed_trajectory: need at least one frame");
    pipe.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jt(0.0, jitter_t_m);
    std::normal_distribution<double> jr(0.0, jitter_rot_rad);

    Trajectory traj;
    traj.spacing_hint_m = spacing_m;
    traj.poses.reserve(frames);
    for (int k = 0; k < frames; ++k) {
        CameraPose pose;
        bool inside = false;
        for (int attempt = 0; attempt < 100 && !inside; ++attempt) {
            const double tx = jitter_t_m > 0.0 ? jt(rng) : 0.0;
            const double ty = jitter_t_m > 0.0 ? jt(rng) : 0.0;
            const double tz = jitter_t_m > 0.0 ? jt(rng) : 0.0;
            pose.t = Vec3(tx, ty, k * spacing_m + tz);
            if (jitter_rot_rad > 0.0)
                pose.R = rotation_x(jr(rng)) * rotation_y(jr(rng)) * rotation_z(jr(rng));
            else
                pose.R = Mat3::Identity();
            inside = std::hypot(tx, ty) < pipe.radius_m;
        }
        if (!inside)
            throw std::runtime_error("perturbed_trajectory: jitter keeps leaving the pipe");
        traj.poses.push_back(pose);
    }

    // Normalize the gauge: frame 0 at z = 0 with zero rotation about the
    // axis, matching the convention pose estimation pins down.
    const double z0 = traj.poses[0].t.z();
    const Mat3 fix = rotation_z(-yaw_about_z(traj.poses[0].R));
    for (CameraPose &pose : traj.poses) {
        pose.t.z() -= z0;
        pose.t = fix * pose.t;
        pose.R = fix * pose.R;
    }
    return traj;
}

namespace {

// Orthonormal 8-point DCT-II basis.
struct DctBasis {
    double c[8][8];
    DctBasis() {
        for (int k = 0; k < 8; ++k) {
            const double s = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n) c[k][n] = s * std::cos(kPi * (n + 0.5) * k / 8.0);
        }
    }
};

const int kQuantBase[8][8] = {
    {16, 11, 10, 16, 24, 40, 51, 61},     {12, 12, 14, 19, 26, 58, 60, 55},
    {14, 13, 16, 24, 40, 57, 69, 56},     {14, 17, 22, 29, 51, 87, 80, 62},
    {18, 22, 37, 56, 68, 109, 103, 77},   {24, 35, 55, 64, 81, 104, 113, 92},
    {49, 64, 78, 87, 103, 121, 120, 101}, {72, 92, 95, 98, 112, 100, 103, 99}};

}  // namespace

ColorImage simulate_compression(const ColorImage &img, int quality) {
    if (quality < 1 || quality > 100)
        throw std::invalid_argument("simulate_compression: quality must be in [1, 100]");
    static const DctBasis basis;
    const double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
    double quant[8][8];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            quant[i][j] = std::clamp(std::floor((kQuantBase[i][j] * scale + 50.0) / 100.0), 1.0, 255.0);

    ColorImage out = img;
    double block[8][8], tmp[8][8];
    for (int ch = 0; ch < 3; ++ch) {
        for (int by = 0; by < img.height; by += 8) {
            for (int bx = 0; bx < img.width; bx += 8) {
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        const int y = std::min(by + i, img.height - 1);
                        const int x = std::min(bx + j, img.width - 1);
                        block[i][j] = img.at(y, x)[ch] - 128.0;
                    }
                // F = C * block * C^T, quantize, back-transform.
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int n = 0; n < 8; ++n) acc += basis.c[i][n] * block[n][j];
                        tmp[i][j] = acc;
                    }
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int n = 0; n < 8; ++n) acc += tmp[i][n] * basis.c[j][n];
                        block[i][j] = std::round(acc / quant[i][j]) * quant[i][j];
                    }
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int n = 0; n < 8; ++n) acc += basis.c[n][i] * block[n][j];
                        tmp[i][j] = acc;
                    }
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        const int y = by + i, x = bx + j;
                        if (y >= img.height || x >= img.width) continue;
                        double acc = 0.0;
                        for (int n = 0; n < 8; ++n) acc += tmp[i][n] * basis.c[n][j];
                        out.at(y, x)[ch] = static_cast<float>(acc + 128.0);
                    }
                }
        }
    }
    return out;
}

}  // namespace pipeunroll
