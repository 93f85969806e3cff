#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "pipeunroll/features.hpp"
#include "pipeunroll/synth.hpp"
#include "test_util.hpp"

using namespace pipeunroll;

namespace {

// Feature with a random unit descriptor at the given position.
Feature random_feature(std::mt19937_64 &rng, const Vec2 &pos, int dim = 32) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Feature f;
    f.pos_px = pos;
    f.response = 1.0;
    f.descriptor.resize(dim);
    double norm2 = 0.0;
    for (float &v : f.descriptor) {
        v = static_cast<float>(gauss(rng));
        norm2 += static_cast<double>(v) * v;
    }
    for (float &v : f.descriptor) v /= static_cast<float>(std::sqrt(norm2));
    return f;
}

Vec2 random_annulus_pos(std::mt19937_64 &rng, const FisheyeIntrinsics &intr) {
    std::uniform_real_distribution<double> radius(0.5 * intr.circle_radius_px(),
                                                  0.95 * intr.circle_radius_px());
    std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
    const double a = angle(rng);
    return intr.center_px + radius(rng) * Vec2(std::cos(a), std::sin(a));
}

void check_injective(const MatchSet &m) {
    std::set<int> seen_a, seen_b;
    for (const Match &p : m.pairs) {
        CHECK(seen_a.insert(p.index_a).second);
        CHECK(seen_b.insert(p.index_b).second);
    }
}

Image noise_frame(const FisheyeIntrinsics &intr, std::uint64_t seed) {
    SyntheticScene scene;
    scene.pipe = testutil::default_pipe();
    scene.texture = TextureKind::ValueNoise;
    scene.seed = seed;
    Trajectory traj;
    traj.poses.push_back(CameraPose{});
    UnwrapConfig ucfg;
    ucfg.circumference_samples = 600;
    auto [frames, gt] = render_sequence(scene, traj, intr, ucfg);
    return to_gray(frames[0]);
}

}  // namespace

TEST_CASE("detect returns nothing on a uniform image") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image gray(1024, 1024, 128.0f);
    FeatureConfig cfg;
    CHECK(detect(gray, intr, cfg).empty());
}

TEST_CASE("detect localizes an isolated blob") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image gray(1024, 1024, 100.0f);
    const double cx = 812.0, cy = 512.0;  // inside the outer annulus
    for (int y = 500; y < 525; ++y)
        for (int x = 800; x < 825; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            gray.at(y, x) += static_cast<float>(80.0 * std::exp(-d2 / (2.0 * 9.0)));
        }
    FeatureConfig cfg;
    auto features = detect(gray, intr, cfg);
    REQUIRE(!features.empty());
    bool near = false;
    for (const Feature &f : features)
        if ((f.pos_px - Vec2(cx, cy)).norm() < 2.0) near = true;
    CHECK(near);
    // Sorted by response, strongest first.
    for (size_t i = 1; i < features.size(); ++i)
        CHECK(features[i - 1].response >= features[i].response);
}

TEST_CASE("detect respects the annulus and the feature cap") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image gray = noise_frame(intr, 9);
    FeatureConfig cfg;
    cfg.max_features = 50;
    auto features = detect(gray, intr, cfg);
    CHECK(features.size() <= 50);
    for (const Feature &f : features) {
        const double d = (f.pos_px - intr.center_px).norm();
        CHECK(d >= cfg.annulus_inner * intr.circle_radius_px() - 1e-9);
        CHECK(d <= cfg.annulus_outer * intr.circle_radius_px() + 1e-9);
    }
}

TEST_CASE("a synthetic pipe frame yields plenty of features") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image gray = noise_frame(intr, 33);
    FeatureConfig cfg;
    auto features = detect(gray, intr, cfg);
    CHECK(features.size() >= 200);

    // Determinism.
    auto again = detect(gray, intr, cfg);
    REQUIRE(again.size() == features.size());
    for (size_t i = 0; i < features.size(); ++i) {
        CHECK(again[i].pos_px == features[i].pos_px);
        CHECK(again[i].descriptor == features[i].descriptor);
    }
}

TEST_CASE("matching identical frames pairs every feature with itself") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image gray = noise_frame(intr, 21);
    FeatureConfig cfg;
    cfg.max_features = 400;
    auto features = detect(gray, intr, cfg);
    REQUIRE(features.size() >= 200);

    MatchSet m = match_iterative(features, features, 1, cfg);
    CHECK(m.pairs.size() == features.size());
    for (const Match &p : m.pairs) {
        CHECK(p.index_a == p.index_b);
        CHECK((p.pos_b - p.pos_a).norm() == 0.0);
    }
    check_injective(m);
}

TEST_CASE("matching recovers a shift among decoys") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    std::mt19937_64 rng(43);
    std::normal_distribution<double> jitter(0.0, 0.02);

    const int n = 200;
    std::vector<Feature> a, b;
    for (int i = 0; i < n; ++i) {
        Feature fa = random_feature(rng, random_annulus_pos(rng, intr));
        Feature fb = fa;
        fb.pos_px += Vec2(10.0, 0.0);
        for (float &v : fb.descriptor) v += static_cast<float>(jitter(rng));
        a.push_back(std::move(fa));
        b.push_back(std::move(fb));
    }
    // 20% decoys on both sides.
    for (int i = 0; i < n / 5; ++i) {
        a.push_back(random_feature(rng, random_annulus_pos(rng, intr)));
        b.push_back(random_feature(rng, random_annulus_pos(rng, intr)));
    }

    FeatureConfig cfg;
    MatchSet m = match_iterative(a, b, 3, cfg);
    check_injective(m);
    int correct = 0;
    for (const Match &p : m.pairs)
        if (p.index_a == p.index_b && p.index_a < n) ++correct;
    CHECK(correct >= static_cast<int>(0.95 * n));
}

TEST_CASE("unrelated noise frames produce almost no matches") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image g1 = noise_frame(intr, 100);
    Image g2 = noise_frame(intr, 200);
    FeatureConfig cfg;
    auto f1 = detect(g1, intr, cfg);
    auto f2 = detect(g2, intr, cfg);
    REQUIRE(f1.size() >= 200);
    REQUIRE(f2.size() >= 200);

    MatchSet m = match_iterative(f1, f2, 3, cfg);
    const size_t bound = std::min(f1.size(), f2.size()) / 20;  // 5%
    CHECK(m.pairs.size() < bound);
}

TEST_CASE("more rounds never leave more inconsistent matches") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    std::mt19937_64 rng(47);
    std::normal_distribution<double> jitter(0.0, 0.05);

    const int n = 150;
    std::vector<Feature> a, b;
    for (int i = 0; i < n; ++i) {
        Feature fa = random_feature(rng, random_annulus_pos(rng, intr));
        Feature fb = fa;
        fb.pos_px += Vec2(8.0, 3.0);
        for (float &v : fb.descriptor) v += static_cast<float>(jitter(rng));
        a.push_back(std::move(fa));
        b.push_back(std::move(fb));
    }
    for (int i = 0; i < n / 3; ++i) {
        a.push_back(random_feature(rng, random_annulus_pos(rng, intr)));
        b.push_back(random_feature(rng, random_annulus_pos(rng, intr)));
    }

    FeatureConfig cfg;
    int prev = -1;
    for (int rounds = 1; rounds <= 4; ++rounds) {
        MatchSet m = match_iterative(a, b, rounds, cfg);
        check_injective(m);
        const int bad = count_inconsistent(m, a, b, cfg);
        if (prev >= 0) CHECK(bad <= prev);
        if (rounds >= 2) CHECK(bad == 0);
        prev = bad;
    }

    CHECK_THROWS_AS(match_iterative(a, b, 0, cfg), std::invalid_argument);
}

TEST_CASE("matching is deterministic") {
    FisheyeIntrinsics intr = testutil::default_intrinsics();
    Image g1 = noise_frame(intr, 300);
    Image g2 = noise_frame(intr, 300);  // identical content
    FeatureConfig cfg;
    auto f1 = detect(g1, intr, cfg);
    auto f2 = detect(g2, intr, cfg);
    MatchSet ma = match_iterative(f1, f2, 3, cfg);
    MatchSet mb = match_iterative(f1, f2, 3, cfg);
    REQUIRE(ma.pairs.size() == mb.pairs.size());
    for (size_t i = 0; i < ma.pairs.size(); ++i) {
        CHECK(ma.pairs[i].index_a == mb.pairs[i].index_a);
        CHECK(ma.pairs[i].index_b == mb.pairs[i].index_b);
        CHECK(ma.pairs[i].score == mb.pairs[i].score);
    }
}

TEST_CASE("match debug table lists one line per pair") {
    MatchSet m;
    m.frame_a = 3;
    m.frame_b = 4;
    Match p;
    p.pos_a = Vec2(1.5, 2.5);
    p.pos_b = Vec2(3.5, 4.5);
    p.score = 0.25;
    m.pairs.push_back(p);
    const std::string table = match_debug_table(m);
    CHECK(table.find("3 4 1.5 2.5 3.5 4.5 0.25") != std::string::npos);
}
