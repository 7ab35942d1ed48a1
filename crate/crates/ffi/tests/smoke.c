#include <math.h>
#include <stdio.h>
#include "nfbeam.h"

int main(void) {
    double s[4];
    if (nfb_phase_split(1.0, 0.5, s) != NFB_STATUS_OK) return 1;
    if (fabs(s[0] + s[2] - cos(0.5)) > 1e-12 || fabs(s[1] + s[3] - sin(0.5)) > 1e-12) return 2;
    if (nfb_phase_split(3.0, 0.0, s) != NFB_STATUS_INVALID_ARGUMENT) return 3;
    char msg[128];
    if (nfb_last_error(msg, sizeof msg) == 0) return 4;

    NfbConfig *cfg = nfb_config_new();
    nfb_config_set(cfg, "mt_v", "4");
    nfb_config_set(cfg, "mt_h", "4");
    NfbScenario *sc = NULL;
    if (nfb_scenario_sample(cfg, 3, &sc) != NFB_STATUS_OK) return 5;
    NfbTrialResult *r = NULL;
    if (nfb_trial_run(sc, cfg, &r) != NFB_STATUS_OK) return 6;
    double rates[8];
    size_t k = nfb_trial_rates(r, rates, 8);
    printf("%zu users, sum rate %.6f, %zu streams\n", k, nfb_trial_sum_rate(r), nfb_trial_streams(r));
    nfb_trial_free(r);
    nfb_scenario_free(sc);
    nfb_config_free(cfg);
    return k == 2 ? 0 : 7;
}
