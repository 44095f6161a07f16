"""Checking the engine before trusting its posterior.

Replicates generated by the fitted engine should look like the observed
data.  Comparing test statistics of replicates against the observed value
gives a predictive p-value per statistic: the Gaussian engine reproduces
the variance of Gamma data (it learns second moments) but never its
skewness, and that is exactly the direction in which its quantile
posteriors were miscalibrated.
"""

import numpy as np

from predbayes import Sample, TestFunction, gaussian_init, ppc_replicates, substream

for label, x in (
    ("normal data", Sample(substream(8).standard_normal(300))),
    ("gamma data", Sample(substream(9).gamma(2.0, 0.5, 300))),
):
    print(f"{label} (n=300):")
    for kind in ("sample_variance", "sample_skewness"):
        rep = ppc_replicates(x, lambda s: gaussian_init(s, martingale_variance=True),
                             TestFunction(kind), B=200, seed=10)
        print(f"  {kind:>16}: observed={rep.s_obs:+.3f} "
              f"replicates={rep.s_rep.mean():+.3f} +/- {rep.s_rep.std():.3f} "
              f"p={rep.p:.3f} mean(delta)={np.mean(rep.deltas):+.2f}")
    print()

print("a small p flags a feature of the data the engine cannot regenerate;")
print("the scaled differences (delta) say how far off, in sqrt(n) units")
