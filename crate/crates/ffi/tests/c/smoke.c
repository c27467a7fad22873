#include <stdio.h>
#include <string.h>
#include "relchain.h"

int main(void) {
    const char *toml = "flow = \"oe\"\nblock_size = 6\n[workload]\ntxs = 40\n";
    RcScenario *s = NULL;
    if (rc_scenario_from_toml(toml, &s) != RC_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", rc_last_error_message());
        return 1;
    }
    rc_scenario_set_seed(s, 7);
    RcReport *r = NULL;
    if (rc_run(s, &r) != RC_STATUS_OK) {
        fprintf(stderr, "run: %s\n", rc_last_error_message());
        return 1;
    }
    bool ok = false;
    size_t alarms = 99;
    rc_report_consistent(r, &ok);
    rc_report_alarm_count(r, &alarms);
    const char *json = rc_report_json(r);
    int status = (ok && alarms == 0 && strstr(json, "\"seed\": 7") != NULL) ? 0 : 1;
    rc_report_free(r);
    rc_scenario_free(s);

    RcScenario *bad = NULL;
    if (rc_scenario_from_toml("nodes = 0\n", &bad) != RC_STATUS_INVALID_CONFIG || bad != NULL) {
        status = 1;
    }
    if (strlen(rc_last_error_message()) == 0) {
        status = 1;
    }
    printf("%s\n", status == 0 ? "ok" : "failed");
    return status;
}
