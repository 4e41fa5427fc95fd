#include <math.h>
#include <stdio.h>
#include "ccl.h"

#define CHECK(cond)                                          \
    do {                                                     \
        if (!(cond)) {                                       \
            fprintf(stderr, "check failed: %s\n", #cond);    \
            return 1;                                        \
        }                                                    \
    } while (0)

int main(void) {
    CHECK(fabs(ccl_shape(0.0, 1.0, 5.0) - log(2.0)) < 1e-12);

    CclRover *env = NULL;
    CHECK(ccl_rover_new(NULL, 7, &env) == CCL_STATUS_OK);
    size_t n = ccl_rover_n_agents(env);
    size_t d = ccl_rover_obs_dim(env);
    double obs[64], actions[16], pos[16];
    CHECK(n * d <= 64);
    CHECK(ccl_rover_reset(env, obs, n * d) == CCL_STATUS_OK);

    size_t dims[8];
    for (size_t i = 0; i < n; i++) dims[i] = d;
    CclEngine *engine = NULL;
    CHECK(ccl_engine_new("{\"mode\": \"mixture\"}", dims, n, 3, &engine) == CCL_STATUS_OK);
    CHECK(ccl_engine_reset(engine, obs, n * d) == CCL_STATUS_OK);

    double ccl[8], oem[8], reward = -1.0;
    bool done = false;
    int steps = 0;
    while (!done) {
        for (size_t i = 0; i < 2 * n; i++) actions[i] = (i % 2) ? 0.5 : -0.5;
        CHECK(ccl_rover_step(env, actions, 2 * n, obs, n * d, &reward, &done) == CCL_STATUS_OK);
        CHECK(ccl_engine_step(engine, obs, n * d, ccl, oem, n) == CCL_STATUS_OK);
        for (size_t i = 0; i < n; i++) CHECK(ccl[i] > 0.0 && ccl[i] <= 5.0 && oem[i] >= 0.0);
        steps++;
    }
    CHECK(steps == 50);
    CHECK(ccl_rover_positions(env, pos, 2 * n) == CCL_STATUS_OK);

    CHECK(ccl_rover_step(env, actions, 2 * n, obs, n * d, &reward, &done) == CCL_STATUS_ENVIRONMENT);
    char msg[256];
    CHECK(ccl_last_error(msg, sizeof msg) > 0);
    CHECK(ccl_rover_reset(env, obs, 3) == CCL_STATUS_DIMENSION_MISMATCH);

    ccl_engine_free(engine);
    ccl_rover_free(env);
    printf("ok %s\n", ccl_version());
    return 0;
}
