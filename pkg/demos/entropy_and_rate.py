"""
The critical rate is the reciprocal entropy
===========================================

For a Bernoulli shift the smallest rate that keeps the restricted
sensitivity bound valid along an orbit is ``1/h``.  We estimate it from a
single long sample path and compare with the entropy computed three other
ways.
"""

from fractions import Fraction

from restsens import BernoulliShift, ProbabilityVector, estimate_min_asymptotic_rate
from restsens.entropy import (
    SymbolPartition,
    bernoulli_entropy,
    birkhoff_frequency_entropy,
    brin_katok_estimate,
    partition_entropy,
)

pv = ProbabilityVector((Fraction(1, 3), Fraction(2, 3)))
shift = BernoulliShift(pv)
x = shift.sample_point(7)
n = 10**6

h = bernoulli_entropy(pv)
rate = estimate_min_asymptotic_rate(shift, x, n)
print(f"entropy                {h:.5f}")
print(f"1 / min rate           {rate.reciprocal:.5f}")
print(f"symbol frequencies     {birkhoff_frequency_entropy(shift, x, n).value:.5f}")
print(f"Brin-Katok, n = 10^4   {brin_katok_estimate(shift, x, Fraction(1, 2), 10**4).value:.5f}")
est = partition_entropy(shift, SymbolPartition(2), 200, samples=300, seed=7)
print(f"partition, n = 200     {est.value:.5f} +- {est.half_width:.5f}")

# %%
# The rate estimator takes the worst slope of ``S_n`` over a few offsets.
# Its small upward bias comes from the largest offset on the grid.

print("offsets:", rate.c_grid)
