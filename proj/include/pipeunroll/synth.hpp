#pragma once

#include <cstdint>
#include <vector>

#include "pipeunroll/geometry.hpp"
#include "pipeunroll/image.hpp"
#include "pipeunroll/metrics.hpp"
#include "pipeunroll/pose.hpp"
#include "pipeunroll/unwrap.hpp"

namespace pipeunroll {

enum class TextureKind { Checker, ValueNoise };

// Multiplicative light falloff max(0, 1 - slope * (distance - dist0)) applied
// per rendered sample; dist0 picks the distance where the factor is one.
struct FalloffSpec {
    double slope = 0.0;
    double dist0_m = 0.0;
};

// Axis-aligned patch on the cylinder surface carrying a defect class.
struct Decal {
    double theta_rad = 0.0;   // patch center angle
    double z_m = 0.0;         // patch center along the axis
    double extent_theta_rad = 0.3;
    double extent_z_m = 0.05;
    LabelClass label = LabelClass::Crack;
};

struct SyntheticScene {
    PipeModel pipe;
    TextureKind texture = TextureKind::ValueNoise;
    std::uint64_t seed = 1;
    double base_gray = 128.0;
    double noise_amplitude = 40.0;  // peak deviation from base_gray
    double noise_scale_m = 0.01;    // lattice cell size of the finest octave
    int noise_octaves = 3;
    double checker_period_m = 0.05;
    double checker_contrast = 60.0;
    FalloffSpec lighting;
    std::vector<Decal> decals;
    double decal_darken = 0.35;  // texture attenuation inside decals

    void validate() const;
};

struct GroundTruth {
    Trajectory trajectory;
    ColorImage ideal_unwrap;  // falloff-free texture on the unwrap grid
    Mask label_mask;
    UnwrapGrid unwrap_grid;
};

// Deterministic surface texture value (gray level before tinting) at a
// cylinder surface position.
double texture_value(const SyntheticScene &scene, double theta, double z);

// Concrete-like tint applied to the scalar texture.
Pixel shade(double value);

// Ray-cast fisheye frames of the textured cylinder from the given poses using
// the shared projection and intersection routines, plus the ideal unwrap and
// label mask on the grid covering all frames.
std::pair<std::vector<ColorImage>, GroundTruth> render_sequence(const SyntheticScene &scene,
                                                                const Trajectory &trajectory,
                                                                const FisheyeIntrinsics &intr,
                                                                const UnwrapConfig &unwrap_cfg);

// Jittered trajectory with nominal spacing along the axis. The output gauge
// is normalized: frame 0 sits at z = 0 with zero rotation about the axis, so
// estimated trajectories are directly comparable. Deterministic per seed.
Trajectory perturbed_trajectory(int frames, double spacing_m, double jitter_t_m,
                                double jitter_rot_rad, std::uint64_t seed, const PipeModel &pipe);

// Blocky DCT quantization pass approximating heavy JPEG compression.
ColorImage simulate_compression(const ColorImage &img, int quality);

}  // namespace pipeunroll
