#include <stdio.h>
#include <string.h>

#include "squad_mt.h"

static const char DATASET[] =
    "{\"version\":\"v2.0\",\"data\":[{\"title\":\"T\",\"paragraphs\":[{\"context\":\"Helsinki is the capital.\","
    "\"qas\":[{\"id\":\"q1\",\"question\":\"What is the capital?\",\"is_impossible\":false,"
    "\"answers\":[{\"text\":\"Helsinki\",\"answer_start\":0}]}]}]}]}";

int main(void) {
    SqmtDataset *ds = NULL, *out = NULL;
    char *report = NULL;
    size_t n = 0;
    if (sqmt_dataset_parse((const uint8_t *)DATASET, strlen(DATASET), &ds) != SQMT_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", sqmt_last_error());
        return 1;
    }
    if (sqmt_translate(ds, "{\"source_lang\":\"en\",\"target_lang\":\"fi\"}", &out, &report) != SQMT_STATUS_OK) {
        fprintf(stderr, "translate: %s\n", sqmt_last_error());
        return 1;
    }
    sqmt_dataset_question_count(out, &n);
    if (sqmt_dataset_parse((const uint8_t *)"{", 1, &ds) != SQMT_STATUS_INVALID_DATASET || sqmt_last_error() == NULL) {
        return 1;
    }
    printf("%s %zu %s\n", sqmt_version(), n, strstr(report, "\"retained_questions\":1") ? "retained" : "lost");
    sqmt_string_free(report);
    sqmt_dataset_free(out);
    sqmt_dataset_free(ds);
    return 0;
}
