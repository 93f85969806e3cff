#pragma once

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pipeunroll/features.hpp"
#include "pipeunroll/geometry.hpp"

namespace pipeunroll {

struct PoseConfig {
    int max_iters = 20;
    double tol = 1e-10;           // convergence threshold on the update norm
    int diverge_iters = 5;        // consecutive residual increases before giving up
    int max_halvings = 12;        // damped-step fallback

    int ransac_iters = 200;
    double ransac_threshold_m = 0.005;  // 3D intersection disagreement
    int min_matches = 6;               // minimal sample / solvability bound
    // Candidate poses with the camera center beyond this fraction of the pipe
    // radius are rejected, and solver steps may not cross the bound: a camera
    // on the wall meets every ray immediately beside itself and would soak up
    // arbitrary consensus. In-pipe robots ride close to the axis.
    double max_offset_frac = 0.5;
    // Maximum translation travel of each camera away from its initialization
    // during a solve (0 disables). Consecutive in-pipe frames sit one spacing
    // apart, so the initialization is always roughly right; the cap keeps
    // weakly constrained solves from creeping down the shallow valley toward
    // the wall.
    double max_travel_m = 0.05;
    std::uint64_t seed = 0;

    double spacing_hint_m = 0.05;

    double cg_tol = 1e-14;  // conjugate gradient on the global normal equations
    int cg_max_iters = 0;   // 0 = automatic
};

struct PairEstimate {
    CameraPose pose_a;  // z-translation and z-rotation held fixed
    CameraPose pose_b;
    std::vector<char> inlier_mask;  // one flag per input match
    double residual_rms = 0.0;      // RMS 3D disagreement over inliers, meters
    int iterations = 0;             // final-solve Gauss-Newton iterations
};

struct Trajectory {
    std::vector<CameraPose> poses;
    double spacing_hint_m = 0.05;
};

// Perturbation order used throughout: [dt_x, dt_y, alpha_x, alpha_y, alpha_z].
// dt_z acts additively on p_z and is handled by the solvers directly.
using PoseDelta = std::array<double, 5>;

// Cylinder intersection point of the perturbed line of sight
// t + dt + lambda * dR(alpha) * R * dir, with dR the linearized rotation.
Vec3 surface_point(const CameraPose &pose, const Vec3 &dir_cam, const PoseDelta &delta,
                   const PipeModel &pipe);

// Analytic derivatives of surface_point with respect to the five
// perturbations, evaluated at the given delta.
Eigen::Matrix<double, 3, 5> surface_point_jacobian(const CameraPose &pose, const Vec3 &dir_cam,
                                                   const PoseDelta &delta, const PipeModel &pipe);

// Exact rotation update R* = Rx(ax) * Ry(ay) * Rz(az) * R; re-orthonormalized
// when numerical drift exceeds 1e-12.
Mat3 update_rotation(const Mat3 &R, double alpha_x, double alpha_y, double alpha_z);

// Pairwise pose from matched features: iterative Gauss-Newton on the
// 10-parameter system wrapped in RANSAC. Camera A keeps its z-translation and
// z-rotation; consensus is measured as 3D intersection disagreement.
PairEstimate estimate_pair(const MatchSet &matches, const CameraPose &init_a,
                           const CameraPose &init_b, const PipeModel &pipe,
                           const FisheyeIntrinsics &intr, const PoseConfig &cfg);

// Joint refinement over the whole trajectory: 6K-2 unknowns (frame 0
// contributes 4), block-sparse normal equations solved by Jacobi-preconditioned
// conjugate gradient. Match sets must already be outlier-filtered.
Trajectory optimize_global(const std::vector<MatchSet> &pairs, const Trajectory &init,
                           const PipeModel &pipe, const FisheyeIntrinsics &intr,
                           const PoseConfig &cfg);

// One linearization of the global problem at the given trajectory; exposed so
// the sparse solve can be checked against an independent dense route.
struct GlobalSystem {
    Eigen::SparseMatrix<double> jacobian;  // 3*total_matches x (6K-2)
    Eigen::VectorXd residual;
};
GlobalSystem assemble_global_system(const std::vector<MatchSet> &pairs, const Trajectory &traj,
                                    const PipeModel &pipe, const FisheyeIntrinsics &intr);

// Line format: frame index, t (3 values), R row-major (9 values), full double
// precision; round-trips bit-exactly.
void save_trajectory(const std::filesystem::path &path, const Trajectory &traj);
Trajectory load_trajectory(const std::filesystem::path &path);

// Geodesic angle between two rotations.
double rotation_distance(const Mat3 &a, const Mat3 &b);

}  // namespace pipeunroll
