#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pipeunroll/errors.hpp"
#include "pipeunroll/features.hpp"
#include "pipeunroll/geometry.hpp"
#include "pipeunroll/photometry.hpp"
#include "pipeunroll/pose.hpp"
#include "pipeunroll/synth.hpp"
#include "pipeunroll/unwrap.hpp"

namespace pipeunroll {

struct SynthConfig {
    int frames = 20;
    double spacing_m = 0.05;
    TextureKind texture = TextureKind::ValueNoise;
    double base_gray = 128.0;
    double noise_amplitude = 40.0;
    double noise_scale_m = 0.01;
    int noise_octaves = 3;
    double checker_period_m = 0.05;
    double checker_contrast = 60.0;
    double falloff_slope = 0.0;
    double falloff_dist0_m = 0.0;
    double jitter_t_m = 0.0;
    double jitter_rot_deg = 0.0;
    double decal_darken = 0.35;
    bool jpeg_sim = false;
    int jpeg_quality = 30;
    std::vector<Decal> decals;
};

// One plain-text key/value file configures the whole pipeline; every key is
// documented in the README. Unknown keys are rejected.
struct PipelineConfig {
    std::uint64_t seed = 1;
    FisheyeIntrinsics intrinsics;
    PipeModel pipe;
    FeatureConfig features;
    PoseConfig pose;
    UnwrapConfig unwrap;
    PhotometryConfig photometry;
    SynthConfig synth;

    static PipelineConfig load(const std::filesystem::path &path);
    static PipelineConfig parse(const std::string &text);

    // Apply one "key = value" override; values with several numbers are
    // space-separated.
    void set(const std::string &key, const std::string &value);

    void validate() const;

    // Scene assembled from the synth section; the global seed drives it.
    SyntheticScene scene() const;
    // Pose configuration with the global seed applied.
    PoseConfig pose_config() const;

    // The default configuration rendered as config-file text.
    static std::string documented_defaults();
};

}  // namespace pipeunroll
