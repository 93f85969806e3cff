// pipeunroll command line: synth | pose | stitch | eval. Thin shell over the
// C API; exit codes are 0 on success, 1 on pipeline/runtime failure, 2 on
// invalid input or configuration.

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>

#include "pipeunroll.h"

namespace {

struct SessionDeleter {
    void operator()(pu_session *s) const { pu_session_destroy(s); }
};
using SessionPtr = std::unique_ptr<pu_session, SessionDeleter>;

int exit_code(pu_status status) {
    switch (status) {
        case PU_OK:
            return 0;
        case PU_ERROR_INVALID_ARGUMENT:
            return 2;
        default:
            return 1;
    }
}

int finish(pu_session *session, pu_status status) {
    const char *log = pu_last_log(session);
    if (log && *log) std::fputs(log, stdout);
    if (status != PU_OK) std::fprintf(stderr, "error: %s\n", pu_last_error(session));
    return exit_code(status);
}

SessionPtr make_session(const std::string &config, bool seed_set, std::uint64_t seed, int &code) {
    pu_session *raw = nullptr;
    pu_status status = pu_session_create(config.empty() ? nullptr : config.c_str(), &raw);
    if (status != PU_OK) {
        std::fprintf(stderr, "error: cannot load config '%s'\n", config.c_str());
        code = exit_code(status);
        return nullptr;
    }
    SessionPtr session(raw);
    if (seed_set) {
        status = pu_session_set(session.get(), "seed", std::to_string(seed).c_str());
        if (status != PU_OK) {
            std::fprintf(stderr, "error: %s\n", pu_last_error(session.get()));
            code = exit_code(status);
            return nullptr;
        }
    }
    code = 0;
    return session;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Camera pose estimation, unrolling and stitching for in-pipe fisheye sequences"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(pu_version()));

    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config, "configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the config seed")->each([&](const std::string &) {
        seed_set = true;
    });

    auto *synth = app.add_subcommand("synth", "render a synthetic ground-truth sequence");
    std::string synth_out;
    bool jpeg_sim = false;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_flag("--jpeg-sim", jpeg_sim, "apply the compression-artifact pass to frames");

    auto *pose = app.add_subcommand("pose", "estimate camera poses from a frame directory");
    std::string pose_frames, pose_out;
    pose->add_option("--frames", pose_frames, "directory of fisheye frames")->required();
    pose->add_option("--out", pose_out, "trajectory output file")->required();

    auto *stitch = app.add_subcommand("stitch", "unwrap frames and stitch the pipe surface");
    std::string stitch_frames, stitch_traj, stitch_out;
    bool debug_seams = false;
    stitch->add_option("--frames", stitch_frames, "directory of fisheye frames")->required();
    stitch->add_option("--trajectory", stitch_traj, "trajectory file")->required();
    stitch->add_option("--out", stitch_out, "output PNG")->required();
    stitch->add_flag("--debug-seams", debug_seams, "also write a seam overlay PNG");

    auto *eval = app.add_subcommand("eval", "confusion matrix and mean-IoU over mask directories");
    std::string eval_pred, eval_gt, eval_out;
    eval->add_option("--pred", eval_pred, "directory of predicted palette masks")->required();
    eval->add_option("--gt", eval_gt, "directory of ground-truth palette masks")->required();
    eval->add_option("--out", eval_out, "report output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    int code = 0;
    SessionPtr session = make_session(config, seed_set, seed, code);
    if (!session) return code;

    if (synth->parsed()) {
        if (jpeg_sim) {
            pu_status status = pu_session_set(session.get(), "synth.jpeg_sim", "1");
            if (status != PU_OK) return finish(session.get(), status);
        }
        return finish(session.get(), pu_synth(session.get(), synth_out.c_str()));
    }
    if (pose->parsed())
        return finish(session.get(),
                      pu_pose(session.get(), pose_frames.c_str(), pose_out.c_str()));
    if (stitch->parsed())
        return finish(session.get(), pu_stitch(session.get(), stitch_frames.c_str(),
                                               stitch_traj.c_str(), stitch_out.c_str(),
                                               debug_seams ? 1 : 0));
    if (eval->parsed())
        return finish(session.get(),
                      pu_eval(session.get(), eval_pred.c_str(), eval_gt.c_str(), eval_out.c_str()));
    return 2;
}
