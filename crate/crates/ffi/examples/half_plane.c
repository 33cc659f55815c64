#include <math.h>
#include <stdio.h>

#include "apollon.h"

int main(void) {
    ApollonDomain *g = NULL;
    if (apollon_domain_parse("{\"variant\": \"half_space\", \"normal\": [0, 1]}", &g) != APOLLON_STATUS_OK) {
        char msg[256];
        apollon_last_error(msg, sizeof msg);
        fprintf(stderr, "parse failed: %s\n", msg);
        return 1;
    }
    double x[2] = {0.0, 1.0}, y[2] = {0.0, exp(1.0)};
    ApollonMetricParams params = {.level = 6, .c = 2.0, .resolution = 0.01};
    ApollonEstimate k;
    ApollonStatus s = apollon_metric(g, APOLLON_METRIC_K, &params, x, y, 2, &k);
    if (s != APOLLON_STATUS_OK) {
        char msg[256];
        apollon_last_error(msg, sizeof msg);
        fprintf(stderr, "k failed (%d): %s\n", s, msg);
        apollon_domain_free(g);
        return 1;
    }
    printf("apollon %s: k = %.6f (grid h = %g, gap %.2e)\n", apollon_version(), k.value, k.resolution, k.gap);
    apollon_domain_free(g);
    return 0;
}
