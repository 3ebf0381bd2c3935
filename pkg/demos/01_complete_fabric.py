# %% [markdown]
# Routing a complete PGFT
# Build the small 3-level fabric, look at costs and dividers, then route.

# %%
import numpy as np

from pgft_route import PgftSpec, build_pgft, build_dmodk_tables, compute_costs_and_dividers, prepare, route, trace_path
from pgft_route.analysis import link_loads, make_pattern

spec = PgftSpec.parse("3;2.2.3;1.2.2;1.2.1")
topo = build_pgft(spec)
fab = prepare(topo)
print(spec, "->", len(topo.switches), "switches,", len(topo.nodes), "nodes,", len(topo.links), "cables")
print("switches per level:", [len(lv) for lv in fab.levels])

# %%
pre = compute_costs_and_dividers(fab)
pre.costs.shape          # switches x leaves, hop counts
pre.costs.max()          # 4 hops from a leaf to a leaf in another pod
print("dividers by level:", [sorted({pre.dividers[s] for s in lv}) for lv in fab.levels])

# %%
tables = route(fab)
tr = trace_path(tables, 0, 11)
print("0 -> 11:", [hex(g) for g, _ in tr.hops], tr.shape)

# on a complete fabric the label-based engine gives the very same ports
assert np.array_equal(tables.port, build_dmodk_tables(fab).port)

# %%
rep = link_loads(tables, make_pattern("all2all", fab.n_nodes))
print("all2all max load", rep.max_load, "mean", float(rep.mean_load), "floor", rep.theoretical_floor)
print("load histogram", rep.histogram)
