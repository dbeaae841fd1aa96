#include <math.h>
#include <stdio.h>
#include "quasiprob.h"

#define CHECK(cond)                                           \
    do {                                                      \
        if (!(cond)) {                                        \
            fprintf(stderr, "check failed: %s\n", #cond);     \
            return 1;                                         \
        }                                                     \
    } while (0)

int main(void) {
    QpDataset *d = NULL;
    QpKernel *k = NULL;
    QpOracle *o = NULL;
    double re[2] = {0.0, 0.0};
    double im[2] = {0.0, 0.9};
    QpPointEstimate est[2];
    double p = 0.0;

    CHECK(qp_dataset_simulate(0.36, 5.28, 1.5707963267948966, 21, 2000, 5, &d) == QP_STATUS_OK);
    CHECK(qp_dataset_len(d) == 42000);
    CHECK(qp_kernel_new(1.3, true, &k) == QP_STATUS_OK);
    CHECK(qp_estimate(d, k, re, im, 2, 1, est) == QP_STATUS_OK);
    CHECK(est[1].n == 42000 && est[1].std_err > 0.0);
    CHECK(qp_oracle_new(1.3, &o) == QP_STATUS_OK);
    CHECK(qp_oracle_quasiprob(o, 0.36, 5.28, 1.5707963267948966, 0.0, 0.9, &p) == QP_STATUS_OK);
    CHECK(p < 0.0);
    CHECK(fabs(est[1].value - p) < 5.0 * est[1].std_err);

    CHECK(qp_kernel_new(0.0, false, &k) == QP_STATUS_INVALID_ARGUMENT);
    CHECK(qp_last_error_message() != NULL);

    qp_oracle_free(o);
    qp_kernel_free(k);
    qp_dataset_free(d);
    printf("ok %s\n", qp_version());
    return 0;
}
