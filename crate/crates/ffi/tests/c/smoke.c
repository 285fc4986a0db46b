#include <stdio.h>
#include <string.h>

#include "refdiff.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            fprintf(stderr, "check failed line %d: %s\n", __LINE__, #cond); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(int argc, char **argv) {
    CHECK(argc == 3);
    const char *manifest = argv[1];
    const char *gt_path = argv[2];

    RefdiffConfig cfg = refdiff_config_default(REFDIFF_MODE_FULL);
    RefdiffSelection *sel = NULL;
    CHECK(refdiff_segment(manifest, &cfg, &sel) == REFDIFF_STATUS_OK);

    size_t w = 0, h = 0;
    const uint8_t *mask = refdiff_selection_mask(sel, &w, &h);
    CHECK(mask != NULL && w > 0 && h > 0);

    RefdiffTensor *gt = NULL;
    CHECK(refdiff_tensor_load(gt_path, &gt) == REFDIFF_STATUS_OK);
    CHECK(refdiff_tensor_dtype(gt) == REFDIFF_DTYPE_U8);
    size_t dims[4] = {0};
    CHECK(refdiff_tensor_dims(gt, dims, 4) == 2 && dims[0] == w && dims[1] == h);
    size_t len = 0;
    const uint8_t *gt_data = refdiff_tensor_data_u8(gt, &len);
    CHECK(len == w * h);

    double iou = 0.0;
    CHECK(refdiff_iou(mask, gt_data, w, h, &iou) == REFDIFF_STATUS_OK);
    CHECK(iou == 1.0);

    RefdiffTensor *missing = NULL;
    CHECK(refdiff_tensor_load("/nonexistent.rdtf", &missing) == REFDIFF_STATUS_IO_FAILURE);
    CHECK(missing == NULL);
    CHECK(strstr(refdiff_last_error(), "IoFailure") != NULL);

    refdiff_tensor_free(gt);
    refdiff_selection_free(sel);
    printf("ok\n");
    return 0;
}
