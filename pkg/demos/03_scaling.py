# %% [markdown]
# Scaling
# Preprocessing and table build times as the fabric grows.

# %%
import time

from pgft_route import PgftSpec, build_pgft, build_routing_tables, compute_costs_and_dividers, prepare, route

specs = ["3;8.8.8;1.4.4;1.1.1", "3;16.16.16;1.8.8;1.1.1", "3;24.24.18;1.12.12;1.1.1"]

for text in specs:
    fab = prepare(build_pgft(PgftSpec.parse(text)))
    t0 = time.perf_counter()
    pre = compute_costs_and_dividers(fab)
    t1 = time.perf_counter()
    build_routing_tables(fab, pre)
    t2 = time.perf_counter()
    print(f"{fab.n_nodes:6d} nodes {fab.n_switches:5d} switches  costs {t1 - t0:.3f}s  tables {t2 - t1:.3f}s")

# %%
# threads split each level (costs) and the switch list (tables); output is identical.
# the per-switch numpy work is small, so the GIL eats most of the gain at this size
fab = prepare(build_pgft(PgftSpec.parse(specs[-1])))
for n in (1, 4):
    t0 = time.perf_counter()
    route(fab, threads=n)
    print(n, "threads", round(time.perf_counter() - t0, 3), "s")
