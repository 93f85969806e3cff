/* C interface to the pipeunroll library.
 *
 * All entry points are reentrant for distinct sessions. Strings returned by
 * pu_last_error / pu_last_log belong to the session and stay valid until the
 * next call on that session.
 */
#ifndef PIPEUNROLL_H
#define PIPEUNROLL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pu_status {
    PU_OK = 0,
    PU_ERROR_INVALID_ARGUMENT = 1, /* bad config or input; CLI exit code 2 */
    PU_ERROR_IO = 2,               /* file system or decode failure */
    PU_ERROR_RUNTIME = 3           /* pipeline failure (divergence, too few matches, ...) */
} pu_status;

typedef struct pu_session pu_session;

const char *pu_version(void);

/* Create a session from a config file, or from built-in defaults when
 * config_path is NULL. On failure returns the status and leaves *out_session
 * untouched. */
pu_status pu_session_create(const char *config_path, pu_session **out_session);
void pu_session_destroy(pu_session *session);

/* Apply a single "key = value" override, e.g. pu_session_set(s, "seed", "7"). */
pu_status pu_session_set(pu_session *session, const char *key, const char *value);

const char *pu_last_error(const pu_session *session);
const char *pu_last_log(const pu_session *session);

/* Render the synthetic scene into out_dir: fisheye frames, ground-truth
 * trajectory, ideal unwrap, label mask. */
pu_status pu_synth(pu_session *session, const char *out_dir);

/* Estimate camera poses for the frames in frames_dir and write the trajectory
 * file. */
pu_status pu_pose(pu_session *session, const char *frames_dir, const char *trajectory_out);

/* Unwrap and stitch frames using a trajectory file; writes the final PNG and,
 * if write_seam_debug is nonzero, a seam overlay next to it. */
pu_status pu_stitch(pu_session *session, const char *frames_dir, const char *trajectory_path,
                    const char *out_png, int write_seam_debug);

/* Compare palette masks in pred_dir against gt_dir and write the report. */
pu_status pu_eval(pu_session *session, const char *pred_dir, const char *gt_dir,
                  const char *report_out);

#ifdef __cplusplus
}
#endif

#endif /* PIPEUNROLL_H */
