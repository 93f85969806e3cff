#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>

#include "pipeunroll/pose.hpp"
#include "test_util.hpp"

using namespace pipeunroll;

namespace {

// Central finite differences of surface_point over the five perturbations.
Eigen::Matrix<double, 3, 5> fd_jacobian(const CameraPose &pose, const Vec3 &dir,
                                        const PoseDelta &delta, const PipeModel &pipe,
                                        double step = 1e-6) {
    Eigen::Matrix<double, 3, 5> jac;
    for (int k = 0; k < 5; ++k) {
        PoseDelta plus = delta, minus = delta;
        plus[k] += step;
        minus[k] -= step;
        jac.col(k) = (surface_point(pose, dir, plus, pipe) - surface_point(pose, dir, minus, pipe)) /
                     (2.0 * step);
    }
    return jac;
}

Vec3 random_inward_dir(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> xy(-1.0, 1.0);
    std::uniform_real_distribution<double> fwd(0.2, 1.5);
    Vec3 dir(xy(rng), xy(rng), fwd(rng));
    while (std::hypot(dir.x(), dir.y()) < 0.2) dir = Vec3(xy(rng), xy(rng), fwd(rng));
    return dir;
}

}  // namespace

TEST_CASE("surface_point at zero delta equals the plain intersection") {
    PipeModel pipe = testutil::default_pipe();
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
        CameraPose pose = testutil::random_pose(rng, pipe, 0.1);
        Vec3 dir = random_inward_dir(rng);
        const Vec3 p = surface_point(pose, dir, {0, 0, 0, 0, 0}, pipe);
        const CylinderHit hit = intersect_cylinder(Ray{pose.t, pose.R * dir}, pipe);
        CHECK((p - hit.point).norm() < 1e-12);
    }
}

TEST_CASE("surface_point z shifts additively with dt_z") {
    PipeModel pipe = testutil::default_pipe();
    std::mt19937_64 rng(29);
    for (int i = 0; i < 100; ++i) {
        CameraPose pose = testutil::random_pose(rng, pipe, 0.0);
        Vec3 dir = random_inward_dir(rng);
        const double dtz = 0.013;
        const Vec3 base = surface_point(pose, dir, {0, 0, 0, 0, 0}, pipe);
        CameraPose shifted = pose;
        shifted.t.z() += dtz;
        const Vec3 moved = surface_point(shifted, dir, {0, 0, 0, 0, 0}, pipe);
        CHECK((moved - base - Vec3(0, 0, dtz)).norm() < 1e-12);
    }
}

TEST_CASE("surface_point jacobian matches central differences") {
    PipeModel pipe = testutil::default_pipe();
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> small(-0.01, 0.01);
    for (int i = 0; i < 100; ++i) {
        CameraPose pose = testutil::random_pose(rng, pipe, 0.05);
        Vec3 dir = random_inward_dir(rng);
        PoseDelta delta{small(rng), small(rng), small(rng), small(rng), small(rng)};
        const auto analytic = surface_point_jacobian(pose, dir, delta, pipe);
        const auto numeric = fd_jacobian(pose, dir, delta, pipe);
        const double rel = (analytic - numeric).norm() / std::max(1.0, numeric.norm());
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("update_rotation composes the exact axis rotations") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> angle(-1.5, 1.5);

    Mat3 r = rotation_x(0.3) * rotation_y(-0.2);
    CHECK((update_rotation(r, 0, 0, 0) - r).norm() == 0.0);

    const Mat3 quarter = update_rotation(Mat3::Identity(), 0, 0, deg_to_rad(90.0));
    CHECK((quarter * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);

    for (int i = 0; i < 500; ++i) {
        const Mat3 out = update_rotation(r, angle(rng), angle(rng), angle(rng));
        CHECK(((out.transpose() * out) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        r = out;
    }
}

TEST_CASE("estimate_pair is a fixed point at the true poses") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    std::mt19937_64 rng(41);
    CameraPose truth_a = testutil::random_pose(rng, pipe, 0.0);
    CameraPose truth_b = testutil::random_pose(rng, pipe, 0.05);
    MatchSet matches = testutil::synthetic_matches(truth_a, truth_b, pipe, intr, 120, rng);
    REQUIRE(matches.pairs.size() >= 100);

    PoseConfig cfg;
    PairEstimate est = estimate_pair(matches, truth_a, truth_b, pipe, intr, cfg);
    CHECK(est.iterations == 1);
    CHECK((est.pose_a.t - truth_a.t).norm() < 1e-10);
    CHECK((est.pose_b.t - truth_b.t).norm() < 1e-10);
    CHECK(rotation_distance(est.pose_a.R, truth_a.R) < 1e-10);
    CHECK(rotation_distance(est.pose_b.R, truth_b.R) < 1e-10);
    CHECK(est.residual_rms < 1e-12);
    for (char flag : est.inlier_mask) CHECK(flag == 1);
}

TEST_CASE("estimate_pair recovers displaced initializations") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    std::mt19937_64 rng(43);
    CameraPose truth_a = testutil::random_pose(rng, pipe, 0.0);
    CameraPose truth_b = testutil::random_pose(rng, pipe, 0.05);
    MatchSet matches = testutil::synthetic_matches(truth_a, truth_b, pipe, intr, 150, rng);
    REQUIRE(matches.pairs.size() >= 120);

    // Camera A may only move in its free dimensions (x/y translation and
    // tilt); its z-translation and rotation about the axis stay pinned, so
    // the displacement must not touch them. Tilting alone shifts the yaw at
    // second order, hence the compensating z-rotation.
    CameraPose init_a = truth_a;
    init_a.t += Vec3(0.01, -0.01, 0.0);
    init_a.R = update_rotation(init_a.R, deg_to_rad(2.0), deg_to_rad(-2.0), 0.0);
    init_a.R = rotation_z(yaw_about_z(truth_a.R) - yaw_about_z(init_a.R)) * init_a.R;
    CameraPose init_b = truth_b;
    init_b.t += Vec3(-0.01, 0.01, 0.01);
    init_b.R = update_rotation(init_b.R, deg_to_rad(-2.0), deg_to_rad(2.0), deg_to_rad(2.0));

    PoseConfig cfg;
    PairEstimate est = estimate_pair(matches, init_a, init_b, pipe, intr, cfg);
    CHECK((est.pose_a.t - truth_a.t).norm() < 1e-6);
    CHECK((est.pose_b.t - truth_b.t).norm() < 1e-6);
    CHECK(rotation_distance(est.pose_a.R, truth_a.R) < 1e-6);
    CHECK(rotation_distance(est.pose_b.R, truth_b.R) < 1e-6);
}

TEST_CASE("estimate_pair rejects gross outliers") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    std::mt19937_64 rng(47);
    CameraPose truth_a = testutil::random_pose(rng, pipe, 0.0);
    CameraPose truth_b = testutil::random_pose(rng, pipe, 0.05);
    MatchSet matches = testutil::synthetic_matches(truth_a, truth_b, pipe, intr, 200, rng, 0.0, 0.3);
    REQUIRE(matches.pairs.size() >= 150);

    PoseConfig cfg;
    PairEstimate est = estimate_pair(matches, truth_a, truth_b, pipe, intr, cfg);

    int true_inliers = 0, recovered = 0, false_in = 0;
    for (size_t i = 0; i < matches.pairs.size(); ++i) {
        const bool planted_outlier = matches.pairs[i].score < 0.0;
        if (!planted_outlier) {
            ++true_inliers;
            if (est.inlier_mask[i]) ++recovered;
        } else if (est.inlier_mask[i]) {
            ++false_in;
        }
    }
    CHECK(recovered >= static_cast<int>(0.95 * true_inliers));
    CHECK(false_in <= static_cast<int>(0.05 * matches.pairs.size()));
    CHECK((est.pose_b.t - truth_b.t).norm() < 1e-3);
    CHECK(rotation_distance(est.pose_b.R, truth_b.R) < 1e-3);
}

TEST_CASE("estimate_pair validates its inputs") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    PoseConfig cfg;
    MatchSet tiny;
    tiny.pairs.resize(5);
    CHECK_THROWS_AS(estimate_pair(tiny, CameraPose{}, CameraPose{}, pipe, intr, cfg),
                    std::invalid_argument);
}

namespace {

Trajectory make_truth(int frames, std::uint64_t seed, const PipeModel &pipe) {
    std::mt19937_64 rng(seed);
    Trajectory truth;
    truth.spacing_hint_m = 0.05;
    for (int k = 0; k < frames; ++k) {
        CameraPose pose = testutil::random_pose(rng, pipe, k * 0.05, 0.08, deg_to_rad(1.5));
        truth.poses.push_back(pose);
    }
    // Pin the gauge the estimator pins: frame 0 at z = 0, no z-rotation.
    const double z0 = truth.poses[0].t.z();
    const Mat3 fix = rotation_z(-yaw_about_z(truth.poses[0].R));
    for (CameraPose &pose : truth.poses) {
        pose.t.z() -= z0;
        pose.t = fix * pose.t;
        pose.R = fix * pose.R;
    }
    return truth;
}

std::vector<MatchSet> make_pair_matches(const Trajectory &truth, const PipeModel &pipe,
                                        const FisheyeIntrinsics &intr, int per_pair,
                                        std::uint64_t seed, double noise = 0.0) {
    std::mt19937_64 rng(seed);
    std::vector<MatchSet> sets;
    for (size_t k = 0; k + 1 < truth.poses.size(); ++k) {
        MatchSet ms = testutil::synthetic_matches(truth.poses[k], truth.poses[k + 1], pipe, intr,
                                                  per_pair, rng, noise);
        ms.frame_a = static_cast<int>(k);
        ms.frame_b = static_cast<int>(k + 1);
        sets.push_back(std::move(ms));
    }
    return sets;
}

}  // namespace

TEST_CASE("optimize_global keeps a zero-residual init fixed") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Trajectory truth = make_truth(6, 53, pipe);
    auto sets = make_pair_matches(truth, pipe, intr, 80, 59);

    PoseConfig cfg;
    Trajectory out = optimize_global(sets, truth, pipe, intr, cfg);
    for (size_t k = 0; k < truth.poses.size(); ++k) {
        CHECK((out.poses[k].t - truth.poses[k].t).norm() < 1e-10);
        CHECK(rotation_distance(out.poses[k].R, truth.poses[k].R) < 1e-10);
    }
}

TEST_CASE("optimize_global improves a chained local initialization under noise") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Trajectory truth = make_truth(20, 61, pipe);
    auto sets = make_pair_matches(truth, pipe, intr, 150, 67, 0.5);

    PoseConfig cfg;
    // Local chain: estimate each pair starting from the previous estimate.
    Trajectory init;
    init.spacing_hint_m = truth.spacing_hint_m;
    CameraPose current;
    for (size_t k = 0; k < sets.size(); ++k) {
        CameraPose init_b = current;
        init_b.t.z() += truth.spacing_hint_m;
        PairEstimate est = estimate_pair(sets[k], current, init_b, pipe, intr, cfg);
        if (k == 0) init.poses.push_back(est.pose_a);
        init.poses.push_back(est.pose_b);
        current = est.pose_b;
    }

    Trajectory refined = optimize_global(sets, init, pipe, intr, cfg);
    const auto before = testutil::trajectory_error(init, truth);
    const auto after = testutil::trajectory_error(refined, truth);

    // The total squared residual never increases over the initialization.
    const double ssr_init =
        assemble_global_system(sets, init, pipe, intr).residual.squaredNorm();
    const double ssr_refined =
        assemble_global_system(sets, refined, pipe, intr).residual.squaredNorm();
    CHECK(ssr_refined <= ssr_init);

    double mean_before = 0.0, mean_after = 0.0;
    for (size_t k = 0; k < truth.poses.size(); ++k) {
        mean_before += (init.poses[k].t - truth.poses[k].t).norm();
        mean_after += (refined.poses[k].t - truth.poses[k].t).norm();
    }
    mean_before /= truth.poses.size();
    mean_after /= truth.poses.size();

    CHECK(mean_after <= mean_before);
    CHECK(after.max_position_m < 1e-3);
    CHECK(before.max_position_m > 0.0);
}

TEST_CASE("optimize_global pins the first frame's gauge") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Trajectory truth = make_truth(5, 71, pipe);
    auto sets = make_pair_matches(truth, pipe, intr, 100, 73, 0.5);

    Trajectory init = truth;  // displaced a little, except the pinned gauge
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> d(-0.002, 0.002);
    for (size_t k = 1; k < init.poses.size(); ++k) init.poses[k].t += Vec3(d(rng), d(rng), d(rng));

    PoseConfig cfg;
    Trajectory out = optimize_global(sets, init, pipe, intr, cfg);
    CHECK(out.poses[0].t.z() == init.poses[0].t.z());  // never touched
    CHECK(std::abs(yaw_about_z(out.poses[0].R) - yaw_about_z(init.poses[0].R)) < 1e-12);
    for (const CameraPose &pose : out.poses)
        CHECK(((pose.R.transpose() * pose.R) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("optimize_global reports rank deficiency") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Trajectory truth = make_truth(3, 83, pipe);
    auto sets = make_pair_matches(truth, pipe, intr, 50, 89);
    sets[1].pairs.resize(4);  // starve one pair

    PoseConfig cfg;
    CHECK_THROWS_WITH_AS(optimize_global(sets, truth, pipe, intr, cfg),
                         doctest::Contains("rank deficient"), std::runtime_error);
}

TEST_CASE("sparse conjugate-gradient step equals a dense QR least-squares solve") {
    PipeModel pipe = testutil::default_pipe();
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Trajectory truth = make_truth(5, 97, pipe);
    auto sets = make_pair_matches(truth, pipe, intr, 90, 101, 0.5);

    // Linearize at a perturbed trajectory so the step is non-trivial.
    Trajectory lin = truth;
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> d(-0.001, 0.001);
    for (size_t k = 1; k < lin.poses.size(); ++k) lin.poses[k].t += Vec3(d(rng), d(rng), d(rng));

    GlobalSystem sys = assemble_global_system(sets, lin, pipe, intr);
    Eigen::MatrixXd jd = Eigen::MatrixXd(sys.jacobian);

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    Eigen::SparseMatrix<double> h = (sys.jacobian.transpose() * sys.jacobian).pruned();
    cg.setTolerance(1e-14);
    cg.setMaxIterations(20 * static_cast<int>(jd.cols()));
    cg.compute(h);
    Eigen::VectorXd sparse_step = cg.solve(-sys.jacobian.transpose() * sys.residual);

    Eigen::VectorXd dense_step = jd.colPivHouseholderQr().solve(-sys.residual);
    CHECK((sparse_step - dense_step).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("trajectory files round-trip bit-exactly") {
    PipeModel pipe = testutil::default_pipe();
    Trajectory truth = make_truth(7, 107, pipe);
    truth.poses[2].t.x() = 0.1 / 3.0;  // force a non-terminating decimal

    const auto path = std::filesystem::temp_directory_path() / "pipeunroll_traj_test.txt";
    save_trajectory(path, truth);
    Trajectory loaded = load_trajectory(path);
    REQUIRE(loaded.poses.size() == truth.poses.size());
    for (size_t k = 0; k < truth.poses.size(); ++k) {
        CHECK(loaded.poses[k].t == truth.poses[k].t);
        CHECK(loaded.poses[k].R == truth.poses[k].R);
    }
    std::filesystem::remove(path);
}
