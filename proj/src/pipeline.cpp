#include "pipeunroll/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pipeunroll/metrics.hpp"
#include "pipeunroll/photometry.hpp"
#include "pipeunroll/png_io.hpp"

namespace pipeunroll {

namespace fs = std::filesystem;

std::vector<fs::path> list_pngs(const fs::path &dir) {
    if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

RunResult run_synth(const PipelineConfig &cfg, const fs::path &out_dir) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

    const SyntheticScene scene = cfg.scene();
    Trajectory traj = perturbed_trajectory(cfg.synth.frames, cfg.synth.spacing_m,
                                           cfg.synth.jitter_t_m,
                                           deg_to_rad(cfg.synth.jitter_rot_deg), cfg.seed, cfg.pipe);
    auto [frames, gt] = render_sequence(scene, traj, cfg.intrinsics, cfg.unwrap);

    const fs::path frames_dir = out_dir / "frames";
    fs::create_directories(frames_dir, ec);
    char name[32];
    for (size_t k = 0; k < frames.size(); ++k) {
        if (cfg.synth.jpeg_sim) frames[k] = simulate_compression(frames[k], cfg.synth.jpeg_quality);
        std::snprintf(name, sizeof name, "frame_%04zu.png", k);
        write_png_rgb8(frames_dir / name, frames[k]);
    }
    save_trajectory(out_dir / "trajectory.txt", gt.trajectory);
    write_png_rgb8(out_dir / "ideal_unwrap.png", gt.ideal_unwrap);
    {
        std::ofstream header(out_dir / "ideal_unwrap.txt");
        if (!header) throw IoError("synth: cannot open the ideal unwrap header");
        header << "circumference_samples " << gt.unwrap_grid.circumference_samples << '\n';
        header << "theta0_rad " << gt.unwrap_grid.theta0 << '\n';
        header << "axial_resolution_m " << gt.unwrap_grid.axial_resolution_m << '\n';
        header << "row_start " << gt.unwrap_grid.row_start << '\n';
        header << "rows " << gt.unwrap_grid.rows << '\n';
    }
    write_png_palette(out_dir / "label_mask.png", gt.label_mask, label_palette());

    std::ostringstream log;
    log << "synth: wrote " << frames.size() << " frames, trajectory, ideal unwrap ("
        << gt.ideal_unwrap.width << "x" << gt.ideal_unwrap.height << ") and label mask to "
        << out_dir.string() << "\n";
    if (!cfg.synth.decals.empty()) {
        const std::vector<LabelMask> masks = {gt.label_mask};
        log << format_class_stats(class_stats(masks));
    }
    return {log.str()};
}

RunResult run_pose(const PipelineConfig &cfg, const fs::path &frames_dir,
                   const fs::path &trajectory_out) {
    cfg.validate();
    const auto files = list_pngs(frames_dir);
    if (files.size() < 2)
        throw ValidationError("pose: need at least 2 frames, found " +
                              std::to_string(files.size()));

    FeatureConfig feat_cfg = cfg.features;
    feat_cfg.flow_center = cfg.intrinsics.center_px;
    std::vector<std::vector<Feature>> features;
    features.reserve(files.size());
    for (const auto &f : files)
        features.push_back(detect(to_gray(read_png_rgb8(f)), cfg.intrinsics, feat_cfg));

    const PoseConfig pose_cfg = cfg.pose_config();
    std::ostringstream log;
    std::vector<MatchSet> inlier_sets;
    Trajectory init;
    init.spacing_hint_m = pose_cfg.spacing_hint_m;

    CameraPose current;  // frame 0 seed: on the axis at z = 0
    for (size_t k = 0; k + 1 < files.size(); ++k) {
        MatchSet matches = match_iterative(features[k], features[k + 1], feat_cfg.rounds, feat_cfg);
        matches.frame_a = static_cast<int>(k);
        matches.frame_b = static_cast<int>(k + 1);

        CameraPose init_b = current;
        init_b.t.z() += pose_cfg.spacing_hint_m;
        PairEstimate est;
        try {
            est = estimate_pair(matches, current, init_b, cfg.pipe, cfg.intrinsics, pose_cfg);
        } catch (const std::exception &e) {
            throw std::runtime_error("pose: pair " + std::to_string(k) + "-" +
                                     std::to_string(k + 1) + ": " + e.what());
        }

        MatchSet inliers;
        inliers.frame_a = matches.frame_a;
        inliers.frame_b = matches.frame_b;
        for (size_t i = 0; i < matches.pairs.size(); ++i)
            if (est.inlier_mask[i]) inliers.pairs.push_back(matches.pairs[i]);
        const size_t inlier_count = inliers.pairs.size();
        inlier_sets.push_back(std::move(inliers));

        if (k == 0) init.poses.push_back(est.pose_a);
        init.poses.push_back(est.pose_b);
        current = est.pose_b;

        char line[160];
        std::snprintf(line, sizeof line,
                      "pair %zu-%zu: %zu matches, %zu inliers, rms %.3g m, %d iterations\n", k,
                      k + 1, matches.pairs.size(), inlier_count, est.residual_rms, est.iterations);
        log << line;
    }

    Trajectory refined = optimize_global(inlier_sets, init, cfg.pipe, cfg.intrinsics, pose_cfg);
    save_trajectory(trajectory_out, refined);
    log << "pose: wrote trajectory with " << refined.poses.size() << " frames to "
        << trajectory_out.string() << "\n";
    return {log.str()};
}

RunResult run_stitch(const PipelineConfig &cfg, const fs::path &frames_dir,
                     const fs::path &trajectory_path, const fs::path &out_png, bool debug_seams) {
    cfg.validate();
    const auto files = list_pngs(frames_dir);
    Trajectory traj = load_trajectory(trajectory_path);
    if (traj.poses.empty()) throw ValidationError("stitch: trajectory is empty");
    if (traj.poses.size() != files.size())
        throw ValidationError("stitch: trajectory has " + std::to_string(traj.poses.size()) +
                              " poses for " + std::to_string(files.size()) + " frames");

    // A frame that advances axial coverage by less than a couple of blend
    // bands adds a seam without adding surface; skip it.
    const long min_advance_rows = 2 * cfg.photometry.blend_band_px + 8;
    std::vector<UnwrapStrip> strips;
    std::ostringstream skipped;
    strips.reserve(files.size());
    for (size_t k = 0; k < files.size(); ++k) {
        const UnwrapGrid grid = grid_for_frame(traj.poses[k], cfg.unwrap, cfg.intrinsics, cfg.pipe);
        if (!strips.empty() && k + 1 < files.size() &&
            grid.row_start - strips.back().row_start() < min_advance_rows) {
            skipped << "stitch: skipping frame " << k << " (advances coverage by only "
                    << grid.row_start - strips.back().row_start() << " rows)\n";
            continue;
        }
        const ColorImage frame = read_png_rgb8(files[k]);
        UnwrapStrip strip = unwrap_frame(frame, traj.poses[k], cfg.intrinsics, cfg.pipe, grid);
        strip.frame_index = static_cast<int>(k);
        strips.push_back(std::move(strip));
    }

    StitchResult result = stitch(strips, cfg.photometry);
    write_png_rgb8(out_png, result.image);

    std::filesystem::path header = out_png;
    header.replace_extension(".txt");
    {
        std::ofstream out(header);
        if (!out) throw IoError("stitch: cannot open " + header.string());
        out << "circumference_samples " << strips.front().grid.circumference_samples << '\n';
        out << "theta0_rad " << strips.front().grid.theta0 << '\n';
        out << "axial_resolution_m " << strips.front().grid.axial_resolution_m << '\n';
        out << "row_start " << result.row_start << '\n';
        out << "rows " << result.image.height << '\n';
    }
    std::ostringstream log;
    log << skipped.str();
    log << "stitch: composed " << strips.size() << " strips into " << result.image.width << "x"
        << result.image.height << " unwrap at " << out_png.string() << "\n";
    for (const StitchSeam &seam : result.seams)
        log << "seam " << seam.pair_index << "-" << seam.pair_index + 1 << ": cost " << seam.cost
            << "\n";
    if (debug_seams) {
        fs::path overlay = out_png;
        overlay.replace_extension();
        overlay += "_seams.png";
        write_png_rgb8(overlay, render_seam_overlay(result));
        log << "stitch: wrote seam overlay to " << overlay.string() << "\n";
    }
    return {log.str()};
}

RunResult run_eval(const PipelineConfig &cfg, const fs::path &pred_dir, const fs::path &gt_dir,
                   const fs::path &report_out) {
    cfg.validate();
    const auto pred_files = list_pngs(pred_dir);
    const auto gt_files = list_pngs(gt_dir);
    if (pred_files.empty()) throw ValidationError("eval: no prediction masks in " + pred_dir.string());

    auto names = [](const std::vector<fs::path> &v) {
        std::vector<std::string> out;
        for (const auto &p : v) out.push_back(p.filename().string());
        return out;
    };
    if (names(pred_files) != names(gt_files)) {
        throw ValidationError("eval: prediction and ground-truth file names do not match between " +
                              pred_dir.string() + " and " + gt_dir.string());
    }

    std::vector<ConfusionMatrix> per_image;
    ConfusionMatrix total;
    for (size_t i = 0; i < pred_files.size(); ++i) {
        const Mask pred = read_png_palette(pred_files[i]);
        const Mask gt = read_png_palette(gt_files[i]);
        if (pred.width != gt.width || pred.height != gt.height)
            throw ValidationError("eval: dimension mismatch for " +
                                  pred_files[i].filename().string());
        ConfusionMatrix m = confusion(pred, gt);
        total += m;
        per_image.push_back(m);
    }
    const auto iou = mean_iou(per_image);
    const std::string report = format_report(total, iou);

    std::ofstream out(report_out);
    if (!out) throw IoError("eval: cannot open " + report_out.string());
    out << report;
    return {report};
}

}  // namespace pipeunroll
