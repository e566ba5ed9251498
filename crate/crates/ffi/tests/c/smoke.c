#include <stdio.h>
#include <string.h>
#include "advqa.h"

#define CHECK(call)                                                     \
    do {                                                                \
        advqa_status s_ = (call);                                       \
        if (s_ != ADVQA_STATUS_OK) {                                    \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,           \
                    advqa_last_error() ? advqa_last_error() : "?");     \
            return 1;                                                   \
        }                                                               \
    } while (0)

static const char *CORPUS =
    "{\"version\":\"1.1\",\"data\":[{\"title\":\"t\",\"paragraphs\":[{"
    "\"context\":\"Mozart was born in Salzburg.\",\"qas\":[{\"id\":\"q1\","
    "\"question\":\"Where was Mozart born?\","
    "\"answers\":[{\"answer_start\":19,\"text\":\"Salzburg\"}]}]}]}]}";

int main(void) {
    const char *golds[] = {"Royal Shakespeare"};
    double f1 = 0;
    uint8_t em = 9;
    CHECK(advqa_token_f1("Royal Shakespeare Company", golds, 1, &f1));
    CHECK(advqa_exact_match("Royal Shakespeare Company", golds, 1, &em));
    if (em != 0 || f1 < 0.8 - 1e-9 || f1 > 0.8 + 1e-9) return 2;

    AdvqaCorpus *corpus = NULL;
    AdvqaRecordStore *store = NULL;
    AdvqaCorpus *dataset = NULL;
    AdvqaPredictions *preds = NULL;
    CHECK(advqa_corpus_from_json(CORPUS, &corpus));
    CHECK(advqa_generate(corpus, 42, &store));
    CHECK(advqa_augment(corpus, store, 1, ADVQA_PLACEMENT_PREPEND, &dataset));
    CHECK(advqa_predict(dataset, &preds));
    double mean_em = -1, mean_f1 = -1;
    CHECK(advqa_evaluate(preds, dataset, &mean_em, &mean_f1));

    if (advqa_augment(corpus, store, 1, 7, &dataset) != ADVQA_STATUS_INVALID_ARGUMENT) return 3;
    if (advqa_last_error() == NULL) return 4;

    char *json = NULL;
    CHECK(advqa_predictions_to_json(preds, &json));
    printf("%s %s %.1f %.1f\n", advqa_version(), json, mean_em, mean_f1);
    advqa_string_free(json);
    advqa_predictions_free(preds);
    advqa_corpus_free(dataset);
    advqa_records_free(store);
    advqa_corpus_free(corpus);
    return 0;
}
