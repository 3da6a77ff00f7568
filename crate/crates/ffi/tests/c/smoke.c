#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "varexp.h"

int main(void) {
    VxGrid *g = NULL;
    if (vx_grid_disk(1.0, 16, &g) != VX_STATUS_OK) {
        fprintf(stderr, "grid: %s\n", vx_last_error());
        return 1;
    }
    size_t n = vx_grid_node_count(g);
    double *d = malloc(n * sizeof(double));
    double lambda_inf = 0.0;
    if (vx_distance(g, d, n, &lambda_inf) != VX_STATUS_OK || fabs(lambda_inf - 1.0) > 1e-12) {
        return 2;
    }
    double norm = 0.0;
    if (vx_luxemburg_norm(g, d, n, "2 + x^2", VX_NORM_VARIANT_WEIGHTED, &norm) != VX_STATUS_OK || !(norm > 0.0)) {
        return 3;
    }
    if (vx_luxemburg_norm(g, d, n, "2 +", VX_NORM_VARIANT_WEIGHTED, &norm) != VX_STATUS_PARSE) {
        return 4;
    }
    printf("%s\n", vx_last_error());
    free(d);
    vx_grid_free(g);
    return 0;
}
