"""Full benchmarking pipeline on a desk-scale grid: spec -> instance runs
-> results.csv -> performance profile -> profile.csv.

Writes everything under demos/out/.
"""

from pathlib import Path

from stiefel_mcm import bench

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

spec = bench.parse_experiment_spec({
    "master_seed": 3,
    "grids": [
        {"family": 1, "n": [60, 100], "p": [4], "seeds": [0, 1]},
        {"family": 2, "n": [60], "p": [4], "seeds": [0, 1]},
    ],
    "solvers": ["grp", "gpp", "cbcdp", "qrbase"],
    "config": {"max_iter": 2000},
})

rows = bench.run_bench(spec)
bench.write_results_csv(out / "results.csv", rows)
print(f"{len(rows)} runs -> {out / 'results.csv'}")
for r in rows:
    print(f"  {r.instance:12s} {r.solver:7s} {r.status:16s} k={r.iters:5d} "
          f"f={r.f:+.6f} fvar={r.fval_variance:.2e} {r.wall_s:.2f}s")

table = bench.profile_table(rows, omega_max=1e3, grid_points=60)
bench.write_profile_csv(out / "profile.csv", table)
print(f"\nprofile over {len(table.instances)} instances -> {out / 'profile.csv'}")
print("fraction solved within ratio omega of the fastest:")
print("  omega   " + "  ".join(f"{s:>7s}" for s in table.solvers))
for i in (0, 20, 40, 59):
    vals = "  ".join(f"{v:7.3f}" for v in table.curves[i])
    print(f"  {table.omega[i]:7.2f} {vals}")
