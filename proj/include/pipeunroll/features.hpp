#pragma once

#include <vector>

#include "pipeunroll/geometry.hpp"
#include "pipeunroll/image.hpp"

namespace pipeunroll {

struct Feature {
    Vec2 pos_px = Vec2::Zero();
    std::vector<float> descriptor;
    double response = 0.0;
    int level = 0;
};

struct Match {
    int index_a = -1;
    int index_b = -1;
    Vec2 pos_a = Vec2::Zero();
    Vec2 pos_b = Vec2::Zero();
    double score = 0.0;  // descriptor distance, smaller is better
};

struct MatchSet {
    int frame_a = 0;
    int frame_b = 0;
    std::vector<Match> pairs;
};

struct FeatureConfig {
    int max_features = 1500;
    int pyramid_levels = 3;
    double detect_sigma = 1.2;      // pre-smoothing per level
    double tensor_sigma = 2.0;      // structure tensor window
    double quality_ratio = 0.003;   // threshold relative to strongest response
    double annulus_inner = 0.45;    // fraction of the circle radius
    double annulus_outer = 0.98;
    int descriptor_grid = 12;       // patch is grid x grid samples
    double descriptor_spacing = 2.0;  // sample spacing in level pixels

    double ratio_threshold = 0.8;          // Lowe-style ratio test
    int neighborhood_k = 5;                // neighbors for displacement voting
    double displacement_tol_px = 10.0;     // consistency threshold
    double admit_max_distance = 0.7;       // descriptor gate for re-admission
    int rounds = 3;
    // Displacements are compared in radial/tangential components about this
    // point; under motion along the pipe the flow is radial, so tangential
    // neighbors see identical components while the raw vectors rotate.
    Vec2 flow_center{512.0, 512.0};
};

// Multi-scale corner detection inside the usable annulus of the image circle.
// Features are sorted by response (strongest first) and capped at
// cfg.max_features; identical inputs produce identical outputs.
std::vector<Feature> detect(const Image &gray, const FisheyeIntrinsics &intr,
                            const FeatureConfig &cfg);

// Round 1: mutual nearest-descriptor matches passing the ratio test. Later
// rounds re-admit and drop matches based on agreement with the median
// displacement of their k nearest already-matched neighbors.
MatchSet match_iterative(const std::vector<Feature> &a, const std::vector<Feature> &b, int rounds,
                         const FeatureConfig &cfg);

// Count of matches whose displacement deviates from the neighborhood median
// by more than cfg.displacement_tol_px (diagnostic; used by tests).
int count_inconsistent(const MatchSet &m, const std::vector<Feature> &a,
                       const std::vector<Feature> &b, const FeatureConfig &cfg);

// Plain-text debug table: frame_a frame_b ua va ub vb score.
std::string match_debug_table(const MatchSet &m);

}  // namespace pipeunroll
