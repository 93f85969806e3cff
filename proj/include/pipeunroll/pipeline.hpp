#pragma once

#include <filesystem>
#include <string>

#include "pipeunroll/config.hpp"

namespace pipeunroll {

struct RunResult {
    std::string log;  // human-readable summary printed by the CLI
};

// Render the synthetic scene: frames, ground-truth trajectory, ideal unwrap
// and label mask, all under out_dir.
RunResult run_synth(const PipelineConfig &cfg, const std::filesystem::path &out_dir);

// Feature-based pose recovery over a frame directory, local pairs then global
// refinement; writes the trajectory file.
RunResult run_pose(const PipelineConfig &cfg, const std::filesystem::path &frames_dir,
                   const std::filesystem::path &trajectory_out);

// Unwrap every frame with its pose and stitch the strips into one image.
RunResult run_stitch(const PipelineConfig &cfg, const std::filesystem::path &frames_dir,
                     const std::filesystem::path &trajectory_path,
                     const std::filesystem::path &out_png, bool debug_seams);

// Confusion and mean-IoU over matching palette-mask files.
RunResult run_eval(const PipelineConfig &cfg, const std::filesystem::path &pred_dir,
                   const std::filesystem::path &gt_dir, const std::filesystem::path &report_out);

// Sorted *.png paths in a directory.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path &dir);

}  // namespace pipeunroll
