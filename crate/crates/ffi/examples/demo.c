/* cc demo.c -I../include -L../../../target/release -lsbmtc_ffi -lm -lpthread -ldl
   LD_LIBRARY_PATH=../../../target/release ./a.out */
#include <stdio.h>
#include "sbmtc.h"

int main(void) {
    SbmtcGraph *g = NULL;
    if (sbmtc_graph_parse("0 1\n1 2\n0 2\n2 3\n3 4\n2 4\n", &g) != SBMTC_STATUS_OK) {
        fprintf(stderr, "%s\n", sbmtc_last_error());
        return 1;
    }
    SbmtcChainConfig cfg = sbmtc_chain_config_default();
    cfg.seed = 7;
    SbmtcChain *c = NULL;
    if (sbmtc_chain_new(g, &cfg, &c) != SBMTC_STATUS_OK || sbmtc_chain_run(c) != SBMTC_STATUS_OK) {
        fprintf(stderr, "%s\n", sbmtc_last_error());
        return 1;
    }
    size_t m = sbmtc_graph_edge_count(g);
    double pi[16];
    uint32_t edges[32];
    sbmtc_graph_edges(g, edges, 32);
    sbmtc_chain_seminal_marginals(c, pi, 16);
    for (size_t k = 0; k < m; k++)
        printf("%u %u %.3f\n", edges[2 * k], edges[2 * k + 1], pi[k]);
    printf("log P = %.3f, groups = %zu\n", sbmtc_chain_log_prob(c), sbmtc_chain_num_groups(c));
    sbmtc_chain_free(c);
    sbmtc_graph_free(g);
    return 0;
}
