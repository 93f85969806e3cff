#include "pipeunroll.h"

#include <filesystem>
#include <string>

#include "pipeunroll/pipeline.hpp"

struct pu_session {
    pipeunroll::PipelineConfig cfg;
    std::string last_error;
    std::string last_log;
};

namespace {

template <typename Fn>
pu_status guarded(pu_session *session, Fn &&fn) {
    if (!session) return PU_ERROR_INVALID_ARGUMENT;
    session->last_error.clear();
    try {
        fn();
        return PU_OK;
    } catch (const pipeunroll::IoError &e) {
        session->last_error = e.what();
        return PU_ERROR_IO;
    } catch (const std::filesystem::filesystem_error &e) {
        session->last_error = e.what();
        return PU_ERROR_IO;
    } catch (const std::invalid_argument &e) {
        session->last_error = e.what();
        return PU_ERROR_INVALID_ARGUMENT;
    } catch (const std::domain_error &e) {
        session->last_error = e.what();
        return PU_ERROR_INVALID_ARGUMENT;
    } catch (const std::exception &e) {
        session->last_error = e.what();
        return PU_ERROR_RUNTIME;
    }
}

}  // namespace

extern "C" {

const char *pu_version(void) { return "0.1.0"; }

pu_status pu_session_create(const char *config_path, pu_session **out_session) {
    if (!out_session) return PU_ERROR_INVALID_ARGUMENT;
    auto session = new pu_session;
    pu_status status = guarded(session, [&] {
        if (config_path) session->cfg = pipeunroll::PipelineConfig::load(config_path);
        session->cfg.validate();
    });
    if (status != PU_OK) {
        delete session;
        return status;
    }
    *out_session = session;
    return PU_OK;
}

void pu_session_destroy(pu_session *session) { delete session; }

pu_status pu_session_set(pu_session *session, const char *key, const char *value) {
    if (!session || !key || !value) return PU_ERROR_INVALID_ARGUMENT;
    return guarded(session, [&] { session->cfg.set(key, value); });
}

const char *pu_last_error(const pu_session *session) {
    return session ? session->last_error.c_str() : "null session";
}

const char *pu_last_log(const pu_session *session) {
    return session ? session->last_log.c_str() : "";
}

pu_status pu_synth(pu_session *session, const char *out_dir) {
    if (!session || !out_dir) return PU_ERROR_INVALID_ARGUMENT;
    return guarded(session,
                   [&] { session->last_log = pipeunroll::run_synth(session->cfg, out_dir).log; });
}

pu_status pu_pose(pu_session *session, const char *frames_dir, const char *trajectory_out) {
    if (!session || !frames_dir || !trajectory_out) return PU_ERROR_INVALID_ARGUMENT;
    return guarded(session, [&] {
        session->last_log = pipeunroll::run_pose(session->cfg, frames_dir, trajectory_out).log;
    });
}

pu_status pu_stitch(pu_session *session, const char *frames_dir, const char *trajectory_path,
                    const char *out_png, int write_seam_debug) {
    if (!session || !frames_dir || !trajectory_path || !out_png) return PU_ERROR_INVALID_ARGUMENT;
    return guarded(session, [&] {
        session->last_log = pipeunroll::run_stitch(session->cfg, frames_dir, trajectory_path,
                                                   out_png, write_seam_debug != 0)
                                .log;
    });
}

pu_status pu_eval(pu_session *session, const char *pred_dir, const char *gt_dir,
                  const char *report_out) {
    if (!session || !pred_dir || !gt_dir || !report_out) return PU_ERROR_INVALID_ARGUMENT;
    return guarded(session, [&] {
        session->last_log = pipeunroll::run_eval(session->cfg, pred_dir, gt_dir, report_out).log;
    });
}

}  // extern "C"
