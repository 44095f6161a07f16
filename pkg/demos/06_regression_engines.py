"""Regression parameters by self-simulation, and checking tail adequacy.

A linear-model engine draws a covariate row from the data, simulates a
response from its current (beta, tau2), and nudges the parameters along the
natural gradient with step 1/N; truncating at N = n + 100 and adding a
Gaussian tail correction approximates the infinite run.  On heavy-tailed
data the Gaussian engine cannot regenerate the observed residual tails,
while the Student-t engine can, and the tail check says so.
"""

import numpy as np

from predbayes import (CovariateResampler, TailCorrection, gauss_reg_init,
                       hybrid_finalize, reg_step, run_regression_ppc, substream,
                       synthetic_regression, treg_init)

X, y = synthetic_regression(n=1500, seed=21, residual_df=5.0, tau=1.0)
print(f"synthetic data: n={len(y)}, d={X.shape[1]}, Student-t(5) residuals")

ols = gauss_reg_init(X, y)
tfit = treg_init(X, y, nu=5.0, seed=22)
print(f"gaussian fit:  beta={np.round(ols.beta, 3)}, scale^2={ols.tau2:.3f}")
print(f"student-t fit: beta={np.round(tfit.beta, 3)}, scale^2={tfit.tau2:.3f}")
print("(the t fit's scale is smaller: it discounts the heavy tails)")

# one hybrid posterior draw, spelled out
resampler = CovariateResampler(X)
rng = substream(23)
state = tfit
for _ in range(100):
    state = reg_step(state, resampler, rng)
theta, _ = hybrid_finalize(state, TailCorrection(paths=50), rng,
                           resampler=resampler)
print(f"\none hybrid draw of (beta, tau2): {np.round(theta, 3)}")

print("\ntail check (0.995 quantile of |standardized residuals|), B=100:")
for kind in ("gaussian", "student_t"):
    rep = run_regression_ppc(X, y, kind, B=100, seed=24)["tail"]
    print(f"  {kind:>9}: observed={rep.s_obs:.3f} "
          f"replicates={rep.s_rep.mean():.3f} +/- {rep.s_rep.std():.3f} "
          f"p={rep.p:.2f}")
print("\nthe Gaussian engine's replicates stop near |z|=2.8 while the data")
print("reach past 3.5, so its p-value collapses; the t engine matches")
