# %% [markdown]
# Faults
# Knock out cables and a switch, check validity, sweep every pair and compare loads.

# %%
from pgft_route import (FaultSpec, PgftSpec, build_pgft, build_routing_tables, check_validity, compute_costs_and_dividers,
                        inject_faults, prepare, route, sweep)
from pgft_route.analysis import compare_engines, link_loads, make_pattern

full = build_pgft(PgftSpec.parse("3;4.4.4;1.4.4;1.1.1"))
deg, removed = inject_faults(full, FaultSpec(remove_links=0.08, remove_switches=2, seed=11,
                                             preserve_leaf_connectivity=True))
print(len(removed), "components removed, e.g.", removed[:3])

# %%
fab = prepare(deg)
pre = compute_costs_and_dividers(fab)
print("valid:", check_validity(pre, fab).valid)

tables = build_routing_tables(fab, pre)
rep = sweep(tables, pre)
print(rep.pairs, "pairs traced, holes", len(rep.holes), "violations", len(rep.violations),
      "longest path", rep.max_path_len)

# %%
# losing links concentrates traffic
pattern = make_pattern("all2all", fab.n_nodes)
before = link_loads(route(full), pattern).max_load
after = link_loads(tables, pattern).max_load
print("all2all max load", before, "->", after)

# the label-based engine has nothing to say about a degraded fabric
for row in compare_engines(fab, [pattern, make_pattern("shift", fab.n_nodes, k=16)]):
    print(row)
