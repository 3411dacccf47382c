"""
Norm concentration and the Bayes threshold
==========================================

Two isotropic Gaussians with the same mean and slightly different spreads
overlap almost completely in low dimension. As the dimension grows, the
Euclidean norm of each sample concentrates near sigma * sqrt(n), the two norm
distributions pull apart, and a single threshold on the squared norm
separates the classes.

Run with ``python demos/concentration_and_oracle.py``.
"""

import math

import numpy as np

from hdsep.models import oracle_accuracy_analytic, oracle_threshold
from hdsep.synthgen import GaussianClassSpec, concentration_table, sample_gaussian_class, stack_classes

# %%
# Norm histograms on a shared grid; the overlap is the shared histogram mass.
table = concentration_table(n_list=(2, 50, 500, 5000), sigmas=(1.0, 1.1), samples=5000, bins=60)
print("n      mean|x| (s=1.0)  mean|x| (s=1.1)  overlap")
for row in table:
    h1, h2 = row["histograms"]
    print(f"{row['n']:<6} {h1.mean:15.3f}  {h2.mean:15.3f}  {row['overlap']:.4f}")

# %%
# The optimal rule for equal means is a threshold T on |x - mu|^2.
# Its accuracy follows from the chi-square distribution of the scaled norm.
n, s1, s2 = 500, 1.0, 1.1
rule = oracle_threshold(n, 0.0, s1, s2, labels=(0, 1))
print(f"\nT = {rule.threshold:.2f}  (class means of |x|^2: {n * s1**2:.0f} and {n * s2**2:.0f})")

data = stack_classes(
    sample_gaussian_class(GaussianClassSpec(n, 0.0, s1), 5000, seed=1),
    sample_gaussian_class(GaussianClassSpec(n, 0.0, s2), 5000, seed=2),
)
empirical = np.mean(rule.predict(data.values) == data.labels)
print(f"empirical accuracy {empirical:.4f}, analytic {oracle_accuracy_analytic(n, s1, s2):.4f}")

# %%
# The same 10% difference in spread, read across dimensions.
print("\nn      analytic accuracy, sigma2 = 1.1")
for n in (1, 10, 100, 500, 1000, 5000):
    print(f"{n:<6} {oracle_accuracy_analytic(n, 1.0, 1.1):.4f}")

# relative spread of the norm shrinks like 1/sqrt(n)
h = table[-1]["histograms"][0]
print(f"\nn=5000: sd(|x|) / mean(|x|) = {h.sd / h.mean:.5f}, sigma*sqrt(n) = {math.sqrt(5000):.3f}")
