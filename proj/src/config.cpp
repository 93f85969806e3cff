#include "pipeunroll/config.hpp"

#include <fstream>
#include <sstream>

namespace pipeunroll {

namespace {

std::string trim(const std::string &s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> tokens(const std::string &value) {
    std::istringstream is(value);
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

double parse_double(const std::string &key, const std::string &token) {
    try {
        size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception &) {
        throw ValidationError("config: value '" + token + "' for key '" + key +
                              "' is not a number");
    }
}

long parse_long(const std::string &key, const std::string &token) {
    double v = parse_double(key, token);
    long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw ValidationError("config: value '" + token + "' for key '" + key +
                              "' is not an integer");
    return l;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const ValidationError &e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

PipelineConfig PipelineConfig::parse(const std::string &text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(line_no) +
                                  " is not of the form 'key = value'");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void PipelineConfig::set(const std::string &key, const std::string &value) {
    const auto toks = tokens(value);
    auto want = [&](size_t n) {
        if (toks.size() != n)
            throw ValidationError("config: key '" + key + "' expects " + std::to_string(n) +
                                  " value(s), got " + std::to_string(toks.size()));
    };
    auto num = [&](size_t i) { return parse_double(key, toks[i]); };
    auto integer = [&](size_t i) { return parse_long(key, toks[i]); };

    if (key == "seed") {
        want(1);
        seed = static_cast<std::uint64_t>(integer(0));
    } else if (key == "intrinsics.fov_deg") {
        want(1);
        intrinsics.fov_deg = num(0);
    } else if (key == "intrinsics.circle_diameter_px") {
        want(1);
        intrinsics.circle_diameter_px = num(0);
    } else if (key == "intrinsics.center_px") {
        want(2);
        intrinsics.center_px = Vec2(num(0), num(1));
    } else if (key == "intrinsics.image_size_px") {
        want(2);
        intrinsics.image_size_px = Vec2(num(0), num(1));
    } else if (key == "pipe.radius_m") {
        want(1);
        pipe.radius_m = num(0);
    } else if (key == "pipe.length_m") {
        want(1);
        pipe.length_m = num(0);
    } else if (key == "features.max_features") {
        want(1);
        features.max_features = static_cast<int>(integer(0));
    } else if (key == "features.levels") {
        want(1);
        features.pyramid_levels = static_cast<int>(integer(0));
    } else if (key == "features.quality_ratio") {
        want(1);
        features.quality_ratio = num(0);
    } else if (key == "features.annulus_inner") {
        want(1);
        features.annulus_inner = num(0);
    } else if (key == "features.annulus_outer") {
        want(1);
        features.annulus_outer = num(0);
    } else if (key == "features.ratio") {
        want(1);
        features.ratio_threshold = num(0);
    } else if (key == "features.neighborhood_k") {
        want(1);
        features.neighborhood_k = static_cast<int>(integer(0));
    } else if (key == "features.displacement_tol_px") {
        want(1);
        features.displacement_tol_px = num(0);
    } else if (key == "features.admit_max_distance") {
        want(1);
        features.admit_max_distance = num(0);
    } else if (key == "features.rounds") {
        want(1);
        features.rounds = static_cast<int>(integer(0));
    } else if (key == "pose.max_iters") {
        want(1);
        pose.max_iters = static_cast<int>(integer(0));
    } else if (key == "pose.tol") {
        want(1);
        pose.tol = num(0);
    } else if (key == "pose.ransac_iters") {
        want(1);
        pose.ransac_iters = static_cast<int>(integer(0));
    } else if (key == "pose.ransac_threshold_m") {
        want(1);
        pose.ransac_threshold_m = num(0);
    } else if (key == "pose.min_matches") {
        want(1);
        pose.min_matches = static_cast<int>(integer(0));
    } else if (key == "pose.spacing_hint_m") {
        want(1);
        pose.spacing_hint_m = num(0);
    } else if (key == "pose.max_offset_frac") {
        want(1);
        pose.max_offset_frac = num(0);
    } else if (key == "pose.max_travel_m") {
        want(1);
        pose.max_travel_m = num(0);
    } else if (key == "unwrap.circumference_samples") {
        want(1);
        unwrap.circumference_samples = static_cast<int>(integer(0));
    } else if (key == "unwrap.theta0_deg") {
        want(1);
        unwrap.theta0 = deg_to_rad(num(0));
    } else if (key == "unwrap.alpha_max_deg") {
        want(1);
        unwrap.alpha_max_deg = num(0);
    } else if (key == "unwrap.min_pixel_ratio") {
        want(1);
        unwrap.min_pixel_ratio = num(0);
    } else if (key == "photometry.sigma_px") {
        want(1);
        photometry.lighting_sigma_px = num(0);
    } else if (key == "photometry.trim_retain") {
        want(1);
        photometry.trim_retain = num(0);
    } else if (key == "photometry.trim_iters") {
        want(1);
        photometry.trim_iters = static_cast<int>(integer(0));
    } else if (key == "photometry.model_smooth_cols") {
        want(1);
        photometry.model_smooth_cols = num(0);
    } else if (key == "photometry.alpha") {
        want(1);
        photometry.seam_alpha = num(0);
    } else if (key == "photometry.beta") {
        want(1);
        photometry.seam_beta = num(0);
    } else if (key == "photometry.band_px") {
        want(1);
        photometry.blend_band_px = static_cast<int>(integer(0));
    } else if (key == "synth.frames") {
        want(1);
        synth.frames = static_cast<int>(integer(0));
    } else if (key == "synth.spacing_m") {
        want(1);
        synth.spacing_m = num(0);
    } else if (key == "synth.texture") {
        want(1);
        if (toks[0] == "noise")
            synth.texture = TextureKind::ValueNoise;
        else if (toks[0] == "checker")
            synth.texture = TextureKind::Checker;
        else
            throw ValidationError("config: synth.texture must be 'noise' or 'checker'");
    } else if (key == "synth.base_gray") {
        want(1);
        synth.base_gray = num(0);
    } else if (key == "synth.noise_amplitude") {
        want(1);
        synth.noise_amplitude = num(0);
    } else if (key == "synth.noise_scale_m") {
        want(1);
        synth.noise_scale_m = num(0);
    } else if (key == "synth.noise_octaves") {
        want(1);
        synth.noise_octaves = static_cast<int>(integer(0));
    } else if (key == "synth.checker_period_m") {
        want(1);
        synth.checker_period_m = num(0);
    } else if (key == "synth.checker_contrast") {
        want(1);
        synth.checker_contrast = num(0);
    } else if (key == "synth.falloff_slope") {
        want(1);
        synth.falloff_slope = num(0);
    } else if (key == "synth.falloff_dist0_m") {
        want(1);
        synth.falloff_dist0_m = num(0);
    } else if (key == "synth.jitter_t_m") {
        want(1);
        synth.jitter_t_m = num(0);
    } else if (key == "synth.jitter_rot_deg") {
        want(1);
        synth.jitter_rot_deg = num(0);
    } else if (key == "synth.decal_darken") {
        want(1);
        synth.decal_darken = num(0);
    } else if (key == "synth.jpeg_sim") {
        want(1);
        synth.jpeg_sim = integer(0) != 0;
    } else if (key == "synth.jpeg_quality") {
        want(1);
        synth.jpeg_quality = static_cast<int>(integer(0));
    } else if (key == "decal") {
        want(5);
        Decal d;
        try {
            d.label = label_from_name(toks[0]);
        } catch (const std::invalid_argument &e) {
            throw ValidationError(std::string("config: ") + e.what());
        }
        d.theta_rad = deg_to_rad(num(1));
        d.z_m = num(2);
        d.extent_theta_rad = deg_to_rad(num(3));
        d.extent_z_m = num(4);
        synth.decals.push_back(d);
    } else {
        throw ValidationError("config: unknown key '" + key + "'");
    }
}

void PipelineConfig::validate() const {
    try {
        intrinsics.validate();
        pipe.validate();
        scene().validate();
    } catch (const std::invalid_argument &e) {
        throw ValidationError(e.what());
    }
    auto require = [](bool ok, const char *msg) {
        if (!ok) throw ValidationError(std::string("config: ") + msg);
    };
    require(features.max_features > 0, "features.max_features must be positive");
    require(features.pyramid_levels > 0, "features.levels must be positive");
    require(features.ratio_threshold > 0 && features.ratio_threshold <= 1,
            "features.ratio must lie in (0, 1]");
    require(features.neighborhood_k > 0, "features.neighborhood_k must be positive");
    require(features.rounds >= 1, "features.rounds must be at least 1");
    require(features.annulus_inner >= 0 && features.annulus_inner < features.annulus_outer &&
                features.annulus_outer <= 1,
            "features annulus bounds must satisfy 0 <= inner < outer <= 1");
    require(pose.max_iters > 0, "pose.max_iters must be positive");
    require(pose.tol > 0, "pose.tol must be positive");
    require(pose.ransac_iters > 0, "pose.ransac_iters must be positive");
    require(pose.ransac_threshold_m > 0, "pose.ransac_threshold_m must be positive");
    require(pose.min_matches >= 6, "pose.min_matches must be at least 6");
    require(pose.spacing_hint_m > 0, "pose.spacing_hint_m must be positive");
    require(pose.max_offset_frac > 0 && pose.max_offset_frac < 1,
            "pose.max_offset_frac must lie in (0, 1)");
    require(unwrap.circumference_samples >= 1, "unwrap.circumference_samples must be >= 1");
    require(unwrap.alpha_max_deg > 0 && unwrap.alpha_max_deg <= 90,
            "unwrap.alpha_max_deg must lie in (0, 90]");
    require(unwrap.min_pixel_ratio > 0, "unwrap.min_pixel_ratio must be positive");
    require(photometry.lighting_sigma_px > 0, "photometry.sigma_px must be positive");
    require(photometry.trim_retain > 0 && photometry.trim_retain <= 1,
            "photometry.trim_retain must lie in (0, 1]");
    require(photometry.trim_iters >= 0, "photometry.trim_iters must be non-negative");
    require(photometry.seam_alpha >= 0 && photometry.seam_beta >= 0,
            "photometry seam weights must be non-negative");
    require(photometry.blend_band_px >= 1, "photometry.band_px must be at least 1");
    require(synth.frames >= 1, "synth.frames must be at least 1");
    require(synth.spacing_m > 0, "synth.spacing_m must be positive");
    require(synth.jpeg_quality >= 1 && synth.jpeg_quality <= 100,
            "synth.jpeg_quality must lie in [1, 100]");
}

SyntheticScene PipelineConfig::scene() const {
    SyntheticScene s;
    s.pipe = pipe;
    s.texture = synth.texture;
    s.seed = seed;
    s.base_gray = synth.base_gray;
    s.noise_amplitude = synth.noise_amplitude;
    s.noise_scale_m = synth.noise_scale_m;
    s.noise_octaves = synth.noise_octaves;
    s.checker_period_m = synth.checker_period_m;
    s.checker_contrast = synth.checker_contrast;
    s.lighting.slope = synth.falloff_slope;
    s.lighting.dist0_m = synth.falloff_dist0_m;
    s.decals = synth.decals;
    s.decal_darken = synth.decal_darken;
    return s;
}

PoseConfig PipelineConfig::pose_config() const {
    PoseConfig p = pose;
    p.seed = seed;
    return p;
}

std::string PipelineConfig::documented_defaults() {
    return R"(# pipeunroll configuration (defaults)

seed = 1

intrinsics.fov_deg = 185
intrinsics.circle_diameter_px = 1000
intrinsics.center_px = 512 512
intrinsics.image_size_px = 1024 1024

pipe.radius_m = 0.125
pipe.length_m = 2.0

features.max_features = 1500
features.levels = 3
features.quality_ratio = 0.003
features.annulus_inner = 0.45
features.annulus_outer = 0.98
features.ratio = 0.8
features.neighborhood_k = 5
features.displacement_tol_px = 10
features.admit_max_distance = 0.7
features.rounds = 3

pose.max_iters = 20
pose.tol = 1e-10
pose.ransac_iters = 200
pose.ransac_threshold_m = 0.005
pose.min_matches = 6
pose.spacing_hint_m = 0.05
pose.max_offset_frac = 0.5
pose.max_travel_m = 0.05

unwrap.circumference_samples = 1200
unwrap.theta0_deg = 90
unwrap.alpha_max_deg = 88
unwrap.min_pixel_ratio = 0.5

photometry.sigma_px = 15
photometry.trim_retain = 0.7
photometry.trim_iters = 3
photometry.model_smooth_cols = 8
photometry.alpha = 1
photometry.beta = 0.5
photometry.band_px = 8

synth.frames = 20
synth.spacing_m = 0.05
synth.texture = noise
synth.base_gray = 128
synth.noise_amplitude = 40
synth.noise_scale_m = 0.01
synth.noise_octaves = 3
synth.checker_period_m = 0.05
synth.checker_contrast = 60
synth.falloff_slope = 0
synth.falloff_dist0_m = 0
synth.jitter_t_m = 0
synth.jitter_rot_deg = 0
synth.decal_darken = 0.35
synth.jpeg_sim = 0
synth.jpeg_quality = 30
# decal = <class> <theta_deg> <z_m> <extent_theta_deg> <extent_z_m>
)";
}

}  // namespace pipeunroll
