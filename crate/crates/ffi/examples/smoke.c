#include <stdio.h>
#include <string.h>

#include "akm.h"

static const char *ADR =
    "# 0001. Use PostgreSQL\n\nStatus: accepted\n\n"
    "## Context\n\nOrders need storage.\n\n"
    "## Decision\n\nPostgreSQL.\n\n"
    "## Consequences\n\nOps work.\n";

int main(void) {
    char *json = NULL;
    if (akm_adr_parse(ADR, &json) != AKM_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", akm_last_error());
        return 1;
    }
    char *markdown = NULL;
    if (akm_adr_render(json, &markdown) != AKM_STATUS_OK || strstr(markdown, "## Decision") == NULL) {
        fprintf(stderr, "render: %s\n", akm_last_error());
        return 1;
    }
    akm_string_free(markdown);
    akm_string_free(json);

    AkmStore *store = akm_store_new();
    akm_store_add_text(store, "0001", "postgres for orders");
    akm_store_add_text(store, "0002", "kafka for events");
    char *hits = NULL;
    if (akm_store_search(store, "orders in postgres", 1, &hits) != AKM_STATUS_OK) {
        return 1;
    }
    printf("%zu %s\n", akm_store_len(store), hits);
    akm_string_free(hits);
    akm_store_free(store);

    if (akm_adr_parse("nonsense", &json) != AKM_STATUS_PARSE || akm_last_error() == NULL) {
        return 1;
    }
    return 0;
}
