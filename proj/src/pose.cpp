#include "pipeunroll/pose.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace pipeunroll {

namespace {

struct PerturbedLine {
    Vec3 a;  // perturbed origin
    Vec3 b;  // perturbed direction
    Vec3 m;  // R * dir, the unperturbed rotated direction
};

PerturbedLine perturbed_line(const CameraPose &pose, const Vec3 &dir_cam, const PoseDelta &d) {
    PerturbedLine pl;
    pl.m = pose.R * dir_cam;
    const double ax = d[2], ay = d[3], az = d[4];
    pl.b = Vec3(pl.m.x() - az * pl.m.y() + ay * pl.m.z(),
                az * pl.m.x() + pl.m.y() - ax * pl.m.z(),
                -ay * pl.m.x() + ax * pl.m.y() + pl.m.z());
    pl.a = pose.t + Vec3(d[0], d[1], 0.0);
    return pl;
}

struct LambdaSolution {
    double lambda;
    double A, B, sqrt_disc;
};

LambdaSolution solve_lambda(const PerturbedLine &pl, const PipeModel &pipe) {
    const double A = pl.b.x() * pl.b.x() + pl.b.y() * pl.b.y();
    const double B = 2.0 * (pl.a.x() * pl.b.x() + pl.a.y() * pl.b.y());
    const double C = pl.a.x() * pl.a.x() + pl.a.y() * pl.a.y() - pipe.radius_m * pipe.radius_m;
    if (C >= 0.0) throw std::runtime_error("surface_point: perturbed origin outside the cylinder");
    if (A == 0.0) throw std::runtime_error("surface_point: direction parallel to the cylinder axis");
    const double disc = B * B - 4.0 * A * C;
    if (disc < 0.0) throw std::runtime_error("surface_point: no cylinder intersection");
    const double s = std::sqrt(disc);
    const double q = -0.5 * (B + std::copysign(s, B));
    const double r1 = q / A;
    const double r2 = (q != 0.0) ? C / q : 0.0;
    return {std::max(r1, r2), A, B, s};
}

}  // namespace

Vec3 surface_point(const CameraPose &pose, const Vec3 &dir_cam, const PoseDelta &delta,
                   const PipeModel &pipe) {
    const PerturbedLine pl = perturbed_line(pose, dir_cam, delta);
    const LambdaSolution sol = solve_lambda(pl, pipe);
    return pl.a + sol.lambda * pl.b;
}

Eigen::Matrix<double, 3, 5> surface_point_jacobian(const CameraPose &pose, const Vec3 &dir_cam,
                                                   const PoseDelta &delta, const PipeModel &pipe) {
    const PerturbedLine pl = perturbed_line(pose, dir_cam, delta);
    const LambdaSolution sol = solve_lambda(pl, pipe);
    const double lambda = sol.lambda;
    const Vec3 &m = pl.m;

    // Parameter order: dt_x, dt_y, alpha_x, alpha_y, alpha_z.
    std::array<Vec3, 5> da = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    std::array<Vec3, 5> db = {Vec3::Zero(), Vec3::Zero(), Vec3(0.0, -m.z(), m.y()),
                              Vec3(m.z(), 0.0, -m.x()), Vec3(-m.y(), m.x(), 0.0)};

    // For the positive root, 2*A*lambda + B = sqrt(disc) > 0.
    const double denom = 2.0 * sol.A * lambda + sol.B;

    Eigen::Matrix<double, 3, 5> jac;
    for (int k = 0; k < 5; ++k) {
        const double dA = 2.0 * (pl.b.x() * db[k].x() + pl.b.y() * db[k].y());
        const double dB = 2.0 * (da[k].x() * pl.b.x() + pl.a.x() * db[k].x() +
                                 da[k].y() * pl.b.y() + pl.a.y() * db[k].y());
        const double dC = 2.0 * (pl.a.x() * da[k].x() + pl.a.y() * da[k].y());
        const double dlambda = -(dA * lambda * lambda + dB * lambda + dC) / denom;
        jac.col(k) = da[k] + dlambda * pl.b + lambda * db[k];
    }
    return jac;
}

Mat3 update_rotation(const Mat3 &R, double alpha_x, double alpha_y, double alpha_z) {
    Mat3 out = rotation_x(alpha_x) * rotation_y(alpha_y) * rotation_z(alpha_z) * R;
    if (((out.transpose() * out) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        out = orthonormalize(out);
    return out;
}

namespace {

// Shared pairwise machinery: camera A contributes [dt_x, dt_y, a_x, a_y],
// camera B all six parameters.
struct PairProblem {
    std::vector<Vec3> dirs_a, dirs_b;
    PipeModel pipe;
};

constexpr PoseDelta kZeroDelta{0, 0, 0, 0, 0};

bool plausible_pair(const CameraPose &pose_a, const CameraPose &pose_b, const PipeModel &pipe,
                    const PoseConfig &cfg) {
    const double bound = cfg.max_offset_frac * pipe.radius_m;
    return std::hypot(pose_a.t.x(), pose_a.t.y()) <= bound &&
           std::hypot(pose_b.t.x(), pose_b.t.y()) <= bound;
}

Eigen::Matrix<double, 3, 6> full_jacobian(const CameraPose &pose, const Vec3 &dir,
                                          const PipeModel &pipe) {
    Eigen::Matrix<double, 3, 5> j5 = surface_point_jacobian(pose, dir, kZeroDelta, pipe);
    Eigen::Matrix<double, 3, 6> j6;
    j6.col(0) = j5.col(0);
    j6.col(1) = j5.col(1);
    j6.col(2) = Vec3(0, 0, 1);  // dt_z is additive in p_z
    j6.col(3) = j5.col(2);
    j6.col(4) = j5.col(3);
    j6.col(5) = j5.col(4);
    return j6;
}

void apply_pair_update(CameraPose &pose_a, CameraPose &pose_b, const Eigen::VectorXd &delta) {
    pose_a.t += Vec3(delta[0], delta[1], 0.0);
    pose_a.R = update_rotation(pose_a.R, delta[2], delta[3], 0.0);
    pose_b.t += Vec3(delta[4], delta[5], delta[6]);
    pose_b.R = update_rotation(pose_b.R, delta[7], delta[8], delta[9]);
}

double pair_ssr(const PairProblem &prob, const CameraPose &pose_a, const CameraPose &pose_b,
                const std::vector<int> &indices) {
    double ssr = 0.0;
    for (int i : indices) {
        Vec3 pa = surface_point(pose_a, prob.dirs_a[i], kZeroDelta, prob.pipe);
        Vec3 pb = surface_point(pose_b, prob.dirs_b[i], kZeroDelta, prob.pipe);
        ssr += (pa - pb).squaredNorm();
    }
    return ssr;
}

// Gauss-Newton on the 10-parameter pair system. Camera A's z-translation has
// no parameter and its rotation about the pipe axis is re-pinned after every
// update: compositions of small x/y rotations leak z-rotation at second
// order, and a rotation of both cameras about the axis leaves all residuals
// unchanged. Returns the iteration count.
int solve_pair(const PairProblem &prob, CameraPose &pose_a, CameraPose &pose_b,
               const std::vector<int> &indices, const PoseConfig &cfg, int max_iters) {
    const int n = static_cast<int>(indices.size());
    Eigen::MatrixXd J(3 * n, 10);
    Eigen::VectorXd r(3 * n);

    const double yaw_ref = yaw_about_z(pose_a.R);
    const Vec3 anchor_a = pose_a.t, anchor_b = pose_b.t;
    double prev_ssr = pair_ssr(prob, pose_a, pose_b, indices);
    int consecutive_increases = 0;
    int iter = 0;
    for (; iter < max_iters; ++iter) {
        for (int row = 0; row < n; ++row) {
            const int i = indices[row];
            Vec3 pa = surface_point(pose_a, prob.dirs_a[i], kZeroDelta, prob.pipe);
            Vec3 pb = surface_point(pose_b, prob.dirs_b[i], kZeroDelta, prob.pipe);
            r.segment<3>(3 * row) = pa - pb;
            Eigen::Matrix<double, 3, 6> ja = full_jacobian(pose_a, prob.dirs_a[i], prob.pipe);
            Eigen::Matrix<double, 3, 6> jb = full_jacobian(pose_b, prob.dirs_b[i], prob.pipe);
            J.block<3, 2>(3 * row, 0) = ja.block<3, 2>(0, 0);   // dt_x, dt_y
            J.block<3, 2>(3 * row, 2) = ja.block<3, 2>(0, 3);   // a_x, a_y
            J.block<3, 6>(3 * row, 4) = -jb;
        }
        Eigen::VectorXd delta = (J.transpose() * J).ldlt().solve(-J.transpose() * r);
        if (!delta.allFinite()) throw std::runtime_error("estimate_pair: singular normal equations");
        if (delta.norm() < cfg.tol) {
            ++iter;
            break;
        }

        CameraPose saved_a = pose_a, saved_b = pose_b;
        double new_ssr = 0.0;
        bool evaluated = false;
        bool accepted = false;
        Eigen::VectorXd step = delta;
        for (int h = 0; h <= cfg.max_halvings; ++h) {
            pose_a = saved_a;
            pose_b = saved_b;
            apply_pair_update(pose_a, pose_b, step);
            const Mat3 fix = rotation_z(yaw_ref - yaw_about_z(pose_a.R));
            pose_a.R = fix * pose_a.R;
            pose_a.t = fix * pose_a.t;
            pose_b.R = fix * pose_b.R;
            pose_b.t = fix * pose_b.t;
            // Steps toward the pipe wall are rejected: the wall is a spurious
            // attractor where every ray meets the surface right beside the
            // camera. The travel cap additionally anchors each camera near
            // its initialization.
            const bool within_travel =
                cfg.max_travel_m <= 0.0 || ((pose_a.t - anchor_a).norm() <= cfg.max_travel_m &&
                                            (pose_b.t - anchor_b).norm() <= cfg.max_travel_m);
            if (!plausible_pair(pose_a, pose_b, prob.pipe, cfg) || !within_travel) {
                step *= 0.5;
                continue;
            }
            try {
                new_ssr = pair_ssr(prob, pose_a, pose_b, indices);
                evaluated = true;
            } catch (const std::runtime_error &) {
                step *= 0.5;
                continue;
            }
            if (new_ssr <= prev_ssr) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            pose_a = saved_a;
            pose_b = saved_b;
            // A fully damped step that cannot move below the current residual
            // by more than rounding noise has stalled at its numerical floor;
            // a step rejected at every scale is pinned against a constraint.
            // Neither is divergence.
            if (!evaluated || new_ssr <= prev_ssr * (1.0 + 1e-9)) {
                ++iter;
                break;
            }
            if (++consecutive_increases >= cfg.diverge_iters)
                throw std::runtime_error("estimate_pair: diverged");
            continue;
        }
        consecutive_increases = 0;
        prev_ssr = new_ssr;
    }
    return iter;
}

std::vector<char> consensus_mask(const PairProblem &prob, const CameraPose &pose_a,
                                 const CameraPose &pose_b, double threshold_m) {
    std::vector<char> mask(prob.dirs_a.size(), 0);
    const double t2 = threshold_m * threshold_m;
    for (size_t i = 0; i < prob.dirs_a.size(); ++i) {
        try {
            Vec3 pa = surface_point(pose_a, prob.dirs_a[i], kZeroDelta, prob.pipe);
            Vec3 pb = surface_point(pose_b, prob.dirs_b[i], kZeroDelta, prob.pipe);
            if ((pa - pb).squaredNorm() <= t2) mask[i] = 1;
        } catch (const std::runtime_error &) {
            // ray misses the cylinder under this candidate: outlier
        }
    }
    return mask;
}

}  // namespace

PairEstimate estimate_pair(const MatchSet &matches, const CameraPose &init_a,
                           const CameraPose &init_b, const PipeModel &pipe,
                           const FisheyeIntrinsics &intr, const PoseConfig &cfg) {
    const int n = static_cast<int>(matches.pairs.size());
    if (n < cfg.min_matches)
        throw std::invalid_argument("estimate_pair: need at least " +
                                    std::to_string(cfg.min_matches) + " matches, got " +
                                    std::to_string(n));
    pipe.validate();
    intr.validate();

    PairProblem prob;
    prob.pipe = pipe;
    prob.dirs_a.reserve(n);
    prob.dirs_b.reserve(n);
    for (const Match &m : matches.pairs) {
        prob.dirs_a.push_back(ray_direction(m.pos_a, intr));
        prob.dirs_b.push_back(ray_direction(m.pos_b, intr));
    }

    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);

    // RANSAC over minimal 6-match samples.
    std::mt19937_64 rng(cfg.seed);
    std::vector<char> best_mask;
    int best_count = -1;
    for (int it = 0; it < cfg.ransac_iters; ++it) {
        std::vector<int> sample;
        if (n == cfg.min_matches) {
            sample = all;
        } else {
            std::vector<int> pool = all;
            for (int k = 0; k < cfg.min_matches; ++k) {
                std::uniform_int_distribution<int> pick(k, n - 1);
                std::swap(pool[k], pool[pick(rng)]);
                sample.push_back(pool[k]);
            }
        }
        CameraPose cand_a = init_a, cand_b = init_b;
        try {
            solve_pair(prob, cand_a, cand_b, sample, cfg, 10);
        } catch (const std::runtime_error &) {
            continue;
        }
        if (!plausible_pair(cand_a, cand_b, pipe, cfg)) continue;
        std::vector<char> mask = consensus_mask(prob, cand_a, cand_b, cfg.ransac_threshold_m);
        int count = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
        if (count > best_count) {
            best_count = count;
            best_mask = std::move(mask);
        }
        if (best_count == n) break;
    }
    if (best_count < cfg.min_matches)
        throw std::runtime_error("estimate_pair: insufficient inliers (" +
                                 std::to_string(std::max(best_count, 0)) + ")");

    std::vector<int> inliers;
    for (int i = 0; i < n; ++i)
        if (best_mask[i]) inliers.push_back(i);

    PairEstimate est;
    est.pose_a = init_a;
    est.pose_b = init_b;
    est.iterations = solve_pair(prob, est.pose_a, est.pose_b, inliers, cfg, cfg.max_iters);
    if (!plausible_pair(est.pose_a, est.pose_b, pipe, cfg))
        throw std::runtime_error("estimate_pair: refined pose left the pipe interior");

    est.inlier_mask = consensus_mask(prob, est.pose_a, est.pose_b, cfg.ransac_threshold_m);
    std::vector<int> final_inliers;
    for (int i = 0; i < n; ++i)
        if (est.inlier_mask[i]) final_inliers.push_back(i);
    if (static_cast<int>(final_inliers.size()) < cfg.min_matches)
        throw std::runtime_error("estimate_pair: insufficient inliers after refinement");
    est.residual_rms = std::sqrt(pair_ssr(prob, est.pose_a, est.pose_b, final_inliers) /
                                 static_cast<double>(final_inliers.size()));
    return est;
}

namespace {

int frame_param_count(int frame) { return frame == 0 ? 4 : 6; }

std::vector<int> param_offsets(int num_frames) {
    std::vector<int> off(num_frames);
    int acc = 0;
    for (int k = 0; k < num_frames; ++k) {
        off[k] = acc;
        acc += frame_param_count(k);
    }
    return off;
}

void apply_global_update(Trajectory &traj, const Eigen::VectorXd &delta,
                         const std::vector<int> &offsets, double yaw_ref) {
    for (size_t k = 0; k < traj.poses.size(); ++k) {
        CameraPose &pose = traj.poses[k];
        const int o = offsets[k];
        if (k == 0) {
            pose.t += Vec3(delta[o], delta[o + 1], 0.0);
            pose.R = update_rotation(pose.R, delta[o + 2], delta[o + 3], 0.0);
        } else {
            pose.t += Vec3(delta[o], delta[o + 1], delta[o + 2]);
            pose.R = update_rotation(pose.R, delta[o + 3], delta[o + 4], delta[o + 5]);
        }
    }
    // Remove the gauge drift about the pipe axis so frame 0 keeps its initial
    // z-rotation exactly; a global rotation about z leaves all residuals
    // unchanged.
    const Mat3 fix = rotation_z(yaw_ref - yaw_about_z(traj.poses[0].R));
    for (CameraPose &pose : traj.poses) {
        pose.R = fix * pose.R;
        pose.t = fix * pose.t;
    }
}

struct GlobalDirs {
    std::vector<std::vector<Vec3>> dirs_a, dirs_b;
};

GlobalDirs global_dirs(const std::vector<MatchSet> &pairs, const FisheyeIntrinsics &intr) {
    GlobalDirs gd;
    gd.dirs_a.resize(pairs.size());
    gd.dirs_b.resize(pairs.size());
    for (size_t p = 0; p < pairs.size(); ++p) {
        gd.dirs_a[p].reserve(pairs[p].pairs.size());
        gd.dirs_b[p].reserve(pairs[p].pairs.size());
        for (const Match &m : pairs[p].pairs) {
            gd.dirs_a[p].push_back(ray_direction(m.pos_a, intr));
            gd.dirs_b[p].push_back(ray_direction(m.pos_b, intr));
        }
    }
    return gd;
}

double global_ssr(const std::vector<MatchSet> &pairs, const GlobalDirs &gd, const Trajectory &traj,
                  const PipeModel &pipe) {
    double ssr = 0.0;
    for (size_t p = 0; p < pairs.size(); ++p) {
        const CameraPose &pa = traj.poses[pairs[p].frame_a];
        const CameraPose &pb = traj.poses[pairs[p].frame_b];
        for (size_t i = 0; i < gd.dirs_a[p].size(); ++i) {
            Vec3 qa = surface_point(pa, gd.dirs_a[p][i], kZeroDelta, pipe);
            Vec3 qb = surface_point(pb, gd.dirs_b[p][i], kZeroDelta, pipe);
            ssr += (qa - qb).squaredNorm();
        }
    }
    return ssr;
}

void validate_global_inputs(const std::vector<MatchSet> &pairs, const Trajectory &traj,
                            int min_matches) {
    const int k = static_cast<int>(traj.poses.size());
    if (k < 2) throw std::invalid_argument("optimize_global: need at least 2 frames");
    for (const MatchSet &ms : pairs) {
        if (ms.frame_b != ms.frame_a + 1 || ms.frame_a < 0 || ms.frame_b >= k)
            throw std::invalid_argument("optimize_global: match set does not join adjacent frames");
        if (static_cast<int>(ms.pairs.size()) < min_matches)
            throw std::runtime_error("optimize_global: rank deficient, pair " +
                                     std::to_string(ms.frame_a) + "-" + std::to_string(ms.frame_b) +
                                     " has " + std::to_string(ms.pairs.size()) + " matches");
    }
}

}  // namespace

GlobalSystem assemble_global_system(const std::vector<MatchSet> &pairs, const Trajectory &traj,
                                    const PipeModel &pipe, const FisheyeIntrinsics &intr) {
    const int num_frames = static_cast<int>(traj.poses.size());
    const std::vector<int> offsets = param_offsets(num_frames);
    const int num_params = offsets.back() + frame_param_count(num_frames - 1);

    size_t total_matches = 0;
    for (const MatchSet &ms : pairs) total_matches += ms.pairs.size();

    GlobalSystem sys;
    sys.residual.resize(3 * total_matches);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(total_matches * 3 * 12);

    size_t row0 = 0;
    for (const MatchSet &ms : pairs) {
        const CameraPose &pose_a = traj.poses[ms.frame_a];
        const CameraPose &pose_b = traj.poses[ms.frame_b];
        for (const Match &m : ms.pairs) {
            const Vec3 dir_a = ray_direction(m.pos_a, intr);
            const Vec3 dir_b = ray_direction(m.pos_b, intr);
            Vec3 pa = surface_point(pose_a, dir_a, kZeroDelta, pipe);
            Vec3 pb = surface_point(pose_b, dir_b, kZeroDelta, pipe);
            sys.residual.segment<3>(row0) = pa - pb;

            Eigen::Matrix<double, 3, 6> ja = full_jacobian(pose_a, dir_a, pipe);
            Eigen::Matrix<double, 3, 6> jb = full_jacobian(pose_b, dir_b, pipe);
            const int oa = offsets[ms.frame_a];
            const int ob = offsets[ms.frame_b];
            // Frame 0 contributes 4 columns: dt_x, dt_y, a_x, a_y.
            static constexpr int kFour[4] = {0, 1, 3, 4};
            for (int d = 0; d < 3; ++d) {
                if (ms.frame_a == 0) {
                    for (int c = 0; c < 4; ++c)
                        triplets.emplace_back(row0 + d, oa + c, ja(d, kFour[c]));
                } else {
                    for (int c = 0; c < 6; ++c) triplets.emplace_back(row0 + d, oa + c, ja(d, c));
                }
                for (int c = 0; c < 6; ++c) triplets.emplace_back(row0 + d, ob + c, -jb(d, c));
            }
            row0 += 3;
        }
    }
    sys.jacobian.resize(static_cast<int>(3 * total_matches), num_params);
    sys.jacobian.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

Trajectory optimize_global(const std::vector<MatchSet> &pairs, const Trajectory &init,
                           const PipeModel &pipe, const FisheyeIntrinsics &intr,
                           const PoseConfig &cfg) {
    validate_global_inputs(pairs, init, cfg.min_matches);
    pipe.validate();
    intr.validate();

    Trajectory traj = init;
    const int num_frames = static_cast<int>(traj.poses.size());
    const std::vector<int> offsets = param_offsets(num_frames);
    const int num_params = offsets.back() + frame_param_count(num_frames - 1);
    const GlobalDirs gd = global_dirs(pairs, intr);
    const double yaw_ref = yaw_about_z(traj.poses[0].R);
    std::vector<Vec3> anchors;
    anchors.reserve(traj.poses.size());
    for (const CameraPose &pose : traj.poses) anchors.push_back(pose.t);

    double prev_ssr = global_ssr(pairs, gd, traj, pipe);
    int consecutive_increases = 0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        GlobalSystem sys = assemble_global_system(pairs, traj, pipe, intr);
        Eigen::SparseMatrix<double> h = (sys.jacobian.transpose() * sys.jacobian).pruned();
        Eigen::VectorXd g = sys.jacobian.transpose() * sys.residual;

        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(cfg.cg_tol);
        cg.setMaxIterations(cfg.cg_max_iters > 0 ? cfg.cg_max_iters : 20 * num_params);
        cg.compute(h);
        Eigen::VectorXd delta = cg.solve(-g);
        if (!delta.allFinite())
            throw std::runtime_error("optimize_global: sparse solve failed");
        if (delta.norm() < cfg.tol) break;

        Trajectory saved = traj;
        bool accepted = false;
        bool evaluated = false;
        Eigen::VectorXd step = delta;
        double new_ssr = 0.0;
        for (int h2 = 0; h2 <= cfg.max_halvings; ++h2) {
            traj = saved;
            apply_global_update(traj, step, offsets, yaw_ref);
            bool plausible = true;
            for (size_t k = 0; k < traj.poses.size(); ++k) {
                const CameraPose &pose = traj.poses[k];
                plausible = plausible && std::hypot(pose.t.x(), pose.t.y()) <=
                                             cfg.max_offset_frac * pipe.radius_m;
                if (cfg.max_travel_m > 0.0)
                    plausible = plausible && (pose.t - anchors[k]).norm() <= cfg.max_travel_m;
            }
            if (!plausible) {
                step *= 0.5;
                continue;
            }
            try {
                new_ssr = global_ssr(pairs, gd, traj, pipe);
                evaluated = true;
            } catch (const std::runtime_error &) {
                step *= 0.5;
                continue;
            }
            if (new_ssr <= prev_ssr) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            traj = saved;
            // Stalled at the numerical floor or pinned against a constraint
            // rather than diverging.
            if (!evaluated || new_ssr <= prev_ssr * (1.0 + 1e-9)) break;
            if (++consecutive_increases >= cfg.diverge_iters)
                throw std::runtime_error("optimize_global: diverged");
            continue;
        }
        consecutive_increases = 0;
        prev_ssr = new_ssr;
    }
    return traj;
}

void save_trajectory(const std::filesystem::path &path, const Trajectory &traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_trajectory: cannot open " + path.string());
    char buf[32];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ' ' << buf;
    };
    out << "# frame tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22\n";
    for (size_t k = 0; k < traj.poses.size(); ++k) {
        const CameraPose &p = traj.poses[k];
        out << k;
        for (int i = 0; i < 3; ++i) emit(p.t[i]);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) emit(p.R(r, c));
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_trajectory: write failed for " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trajectory: cannot open " + path.string());
    Trajectory traj;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        size_t index;
        CameraPose p;
        ls >> index;
        for (int i = 0; i < 3; ++i) ls >> p.t[i];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) ls >> p.R(r, c);
        if (!ls) throw std::runtime_error("load_trajectory: malformed line in " + path.string());
        if (index != traj.poses.size())
            throw std::runtime_error("load_trajectory: non-sequential frame index in " +
                                     path.string());
        traj.poses.push_back(p);
    }
    return traj;
}

double rotation_distance(const Mat3 &a, const Mat3 &b) {
    const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace pipeunroll
