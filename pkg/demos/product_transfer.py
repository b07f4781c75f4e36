"""
Restricted sensitivity survives products
========================================

Take the one-sided 2-shift, which is restricted sensitive at
``a = 1/log 2``, and multiply it by the two-sided shift with the max
metric.  Balls in the product are never larger than balls in the first
factor, so the same rate still works.
"""

from fractions import Fraction
import math

from restsens import BernoulliShift, ProbabilityVector, SensitivityParams, check_restricted_sensitive
from restsens.systems import product_system

left = BernoulliShift(ProbabilityVector.uniform(2))
right = BernoulliShift(ProbabilityVector.uniform(2), two_sided=True)
prod = product_system(left, right)
params = SensitivityParams(Fraction(1, 2), 1 / math.log(2) + 1e-6)
grid = [Fraction(1, 2**k) for k in range(1, 8)]

x = prod.sample_point(3)
v = check_restricted_sensitive(prod, x, params, grid)
print("passes:", v.passed)
for t in v.trials:
    print(f"eps = {t.radius}: product ball {t.ball_measure}, left ball {left.ball_measure(x[0], t.radius)},"
          f" time {t.time} <= {t.bound}")
