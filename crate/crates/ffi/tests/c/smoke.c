#include <stdio.h>
#include <string.h>

#include "sentipipe.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            const char *err = sp_last_error();                       \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,   \
                    err ? err : "no error");                         \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(int argc, char **argv) {
    CHECK(argc == 3);
    SpDataset *ds = NULL;
    CHECK(sp_dataset_load(argv[1], &ds) == SP_STATUS_OK);
    size_t rows = sp_dataset_rows(ds), dim = sp_dataset_dim(ds);
    CHECK(rows == 30 && dim == 4);

    double x[120];
    uint8_t y[30], predicted[30];
    CHECK(sp_dataset_features(ds, x, rows * dim) == SP_STATUS_OK);
    CHECK(sp_dataset_labels(ds, y, rows) == SP_STATUS_OK);

    SpModel *model = NULL;
    CHECK(sp_model_load(argv[2], &model) == SP_STATUS_OK);
    CHECK(sp_model_predict(model, x, rows, dim, predicted) == SP_STATUS_OK);
    CHECK(memcmp(y, predicted, rows) == 0);

    CHECK(sp_model_load("/nonexistent.json", &model) == SP_STATUS_CONFIG);
    CHECK(sp_last_error() != NULL);

    char *clean = NULL;
    CHECK(sp_clean_text("  Hello   WORLD ", &clean) == SP_STATUS_OK);
    CHECK(strcmp(clean, "hello world") == 0);
    sp_string_free(clean);

    sp_model_free(model);
    sp_dataset_free(ds);
    printf("ok %s\n", sp_version());
    return 0;
}
