#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "pipeunroll.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const char *name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct Session {
    pu_session *ptr = nullptr;
    ~Session() { pu_session_destroy(ptr); }
};

}  // namespace

TEST_CASE("session lifecycle and config overrides") {
    CHECK(std::strlen(pu_version()) > 0);

    Session s;
    REQUIRE(pu_session_create(nullptr, &s.ptr) == PU_OK);
    CHECK(std::string(pu_last_error(s.ptr)).empty());

    CHECK(pu_session_set(s.ptr, "seed", "7") == PU_OK);
    CHECK(pu_session_set(s.ptr, "synth.frames", "3") == PU_OK);
    CHECK(pu_session_set(s.ptr, "bogus.key", "1") == PU_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(pu_last_error(s.ptr)).find("bogus.key") != std::string::npos);

    CHECK(pu_session_set(nullptr, "seed", "1") == PU_ERROR_INVALID_ARGUMENT);
    CHECK(pu_synth(s.ptr, nullptr) == PU_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("session creation reports config problems") {
    pu_session *raw = nullptr;
    CHECK(pu_session_create("/nonexistent/config.cfg", &raw) == PU_ERROR_IO);
    CHECK(raw == nullptr);

    TempDir dir("pipeunroll_capi_cfg");
    const fs::path bad = dir.path / "bad.cfg";
    std::ofstream(bad) << "pipe.radius_m = 0\n";
    CHECK(pu_session_create(bad.string().c_str(), &raw) == PU_ERROR_INVALID_ARGUMENT);
    CHECK(raw == nullptr);

    const fs::path good = dir.path / "good.cfg";
    std::ofstream(good) << "seed = 3\npipe.radius_m = 0.1\n";
    Session s;
    CHECK(pu_session_create(good.string().c_str(), &s.ptr) == PU_OK);
}

TEST_CASE("synth then eval runs through the C surface") {
    TempDir dir("pipeunroll_capi_run");
    Session s;
    REQUIRE(pu_session_create(nullptr, &s.ptr) == PU_OK);
    // Small, fast scene.
    REQUIRE(pu_session_set(s.ptr, "synth.frames", "2") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "unwrap.circumference_samples", "300") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.image_size_px", "256 256") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.center_px", "128 128") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.circle_diameter_px", "250") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "decal", "crack 120 0.3 25 0.04") == PU_OK);

    const fs::path out = dir.path / "scene";
    REQUIRE(pu_synth(s.ptr, out.string().c_str()) == PU_OK);
    CHECK(std::string(pu_last_log(s.ptr)).find("synth") != std::string::npos);
    CHECK(fs::exists(out / "frames" / "frame_0000.png"));
    CHECK(fs::exists(out / "frames" / "frame_0001.png"));
    CHECK(fs::exists(out / "trajectory.txt"));
    CHECK(fs::exists(out / "ideal_unwrap.png"));
    CHECK(fs::exists(out / "label_mask.png"));

    // Perfect predictions: the mask evaluated against itself.
    const fs::path pred = dir.path / "pred", gt = dir.path / "gt";
    fs::create_directories(pred);
    fs::create_directories(gt);
    fs::copy_file(out / "label_mask.png", pred / "m.png");
    fs::copy_file(out / "label_mask.png", gt / "m.png");
    const fs::path report = dir.path / "report.txt";
    REQUIRE(pu_eval(s.ptr, pred.string().c_str(), gt.string().c_str(),
                    report.string().c_str()) == PU_OK);
    CHECK(fs::exists(report));
    const std::string log = pu_last_log(s.ptr);
    CHECK(log.find("100.00") != std::string::npos);
    CHECK(log.find("1.000") != std::string::npos);

    // Mismatched file sets are invalid input.
    fs::copy_file(out / "label_mask.png", pred / "extra.png");
    CHECK(pu_eval(s.ptr, pred.string().c_str(), gt.string().c_str(),
                  report.string().c_str()) == PU_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("a corrupt frame file is an I/O error naming the file") {
    TempDir dir("pipeunroll_capi_corrupt");
    const fs::path frames = dir.path / "frames";
    fs::create_directories(frames);
    std::ofstream(frames / "frame_0000.png") << "not a png";
    std::ofstream(frames / "frame_0001.png") << "also not a png";

    Session s;
    REQUIRE(pu_session_create(nullptr, &s.ptr) == PU_OK);
    CHECK(pu_pose(s.ptr, frames.string().c_str(), (dir.path / "t.txt").string().c_str()) ==
          PU_ERROR_IO);
    CHECK(std::string(pu_last_error(s.ptr)).find("frame_0000.png") != std::string::npos);
}

TEST_CASE("pose over a directory with one frame is invalid input") {
    TempDir dir("pipeunroll_capi_pose");
    Session s;
    REQUIRE(pu_session_create(nullptr, &s.ptr) == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "synth.frames", "1") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "unwrap.circumference_samples", "300") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.image_size_px", "256 256") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.center_px", "128 128") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.circle_diameter_px", "250") == PU_OK);
    const fs::path out = dir.path / "scene";
    REQUIRE(pu_synth(s.ptr, out.string().c_str()) == PU_OK);

    const fs::path traj = dir.path / "traj.txt";
    CHECK(pu_pose(s.ptr, (out / "frames").string().c_str(), traj.string().c_str()) ==
          PU_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(pu_last_error(s.ptr)).find("at least 2") != std::string::npos);
}

TEST_CASE("stitch validates trajectory and frame counts") {
    TempDir dir("pipeunroll_capi_stitch");
    Session s;
    REQUIRE(pu_session_create(nullptr, &s.ptr) == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "synth.frames", "2") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "unwrap.circumference_samples", "300") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.image_size_px", "256 256") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.center_px", "128 128") == PU_OK);
    REQUIRE(pu_session_set(s.ptr, "intrinsics.circle_diameter_px", "250") == PU_OK);
    const fs::path out = dir.path / "scene";
    REQUIRE(pu_synth(s.ptr, out.string().c_str()) == PU_OK);

    // An empty trajectory file fails validation.
    const fs::path empty = dir.path / "empty.txt";
    std::ofstream(empty) << "";
    CHECK(pu_stitch(s.ptr, (out / "frames").string().c_str(), empty.string().c_str(),
                    (dir.path / "u.png").string().c_str(), 0) == PU_ERROR_INVALID_ARGUMENT);

    // The ground-truth trajectory works and writes the unwrap plus overlay.
    const fs::path png = dir.path / "unwrap.png";
    REQUIRE(pu_stitch(s.ptr, (out / "frames").string().c_str(),
                      (out / "trajectory.txt").string().c_str(), png.string().c_str(), 1) == PU_OK);
    CHECK(fs::exists(png));
    CHECK(fs::exists(dir.path / "unwrap_seams.png"));
    CHECK(fs::exists(dir.path / "unwrap.txt"));
}
