#ifndef MIDMILE_C_API_H
#define MIDMILE_C_API_H

/* Plain C surface for foreign-language bindings. Every call returning text
 * hands back a JSON document owned by the handle (or by the calling thread
 * for midmile_last_error) and valid until the next call on it. Failures
 * return NULL / nonzero and leave a message in midmile_last_error(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct midmile_env midmile_env;

midmile_env* midmile_env_create(const char* config_json);
/* {"parcel", "actions", "num_actions", "feature_graph", "state_hash"} */
const char* midmile_env_reset(midmile_env* env, uint64_t seed);
/* {"observation", "reward", "done", "info"} */
const char* midmile_env_step(midmile_env* env, size_t action_index);
/* Canonical serialized state. */
const char* midmile_env_state(midmile_env* env);
uint64_t midmile_env_state_hash(midmile_env* env);
void midmile_env_close(midmile_env* env);
const char* midmile_last_error(void);

#ifdef __cplusplus
}
#endif

#endif
