"""How engine bias controls whether the long-run posterior exists at all.

The engine may deliberately perturb its draw law by c_t at step t.  The
one-vs-two-step total-variation gap Delta_t decides existence of the
long-run posterior: if the partial sums of Delta_t converge, the posterior
settles; a constant bias makes them diverge and the paths drift forever.
"""

from predbayes import BiasSchedule, Dgp, run_path_fan, tv_scan

print("TV gap Delta_t and its partial sums, by bias schedule")
print(f"{'t':>7} | {'c=0':>10} | {'c=1/t':>10} | {'c=1/sqrt(t)':>12} | {'c=0.5':>10}")
ts = [100, 1000, 10_000, 100_000]
scans = {
    "none": tv_scan(BiasSchedule("none"), ts),
    "inv_t": tv_scan(BiasSchedule("inv_t"), ts),
    "inv_sqrt_t": tv_scan(BiasSchedule("inv_sqrt_t"), ts),
    "const": tv_scan(BiasSchedule("const_over_N", 2.0), ts),  # c = 1/2
}
for i, t in enumerate(ts):
    row = [scans[k][i]["delta"] for k in ("none", "inv_t", "inv_sqrt_t", "const")]
    print(f"{t:>7} | {row[0]:10.3e} | {row[1]:10.3e} | {row[2]:12.3e} | {row[3]:10.3e}")
print("\npartial sums over the same range (plateau = posterior exists):")
for k in ("none", "inv_t", "inv_sqrt_t", "const"):
    sums = [f"{r['partial_sum']:.4f}" for r in scans[k]]
    print(f"  {k:>11}: {' -> '.join(sums)}")

# the same story seen through simulated trajectories of the variance
print("\nvariance-path medians from n_obs=10, 1000 forward steps, B=500:")
for label, sched in (("none", BiasSchedule("none")),
                     ("inv_sqrt_t on variance",
                      BiasSchedule("inv_sqrt_t", applies_to=frozenset({"variance"})))):
    fan = run_path_fan(Dgp.normal(), sched, steps=1000, B=500, keep=50, seed=3)
    med = fan.var_summary["median"]
    print(f"  {label:>22}: start {med[0]:.3f}, "
          f"t+250 {med[250]:.3f}, t+500 {med[500]:.3f}, end {med[-1]:.3f} "
          f"(fitted {fan.observed_var:.3f})")
print("\nthe decaying biases settle; the sqrt schedule drifts the variance up")
