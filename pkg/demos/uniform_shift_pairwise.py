"""
Pairwise sensitivity of the full 2-shift
========================================

On the one-sided shift with ``d(s, t) = 2**-I(s, t)`` two points separate
beyond ``delta = 1/2`` exactly when their first disagreement is shifted to
index 0.  So the first sensitive time *is* the disagreement index, and the
rate ``a = 1/log 2`` covers it with one step to spare.
"""

from fractions import Fraction
import math

import numpy as np

from restsens import BernoulliShift, ProbabilityVector, SensitivityParams, check_restricted_pairwise
from restsens.shifts import disagreement_index

shift = BernoulliShift(ProbabilityVector.uniform(2))
params = SensitivityParams(Fraction(1, 2), 1 / math.log(2))

# %%
# Sample a thousand independent pairs and look at a few of them.

verdict = check_restricted_pairwise(shift, params, 1000, seed=0)
for t in verdict.trials[:5]:
    print(f"I = {disagreement_index(t.point, t.other):2d}  time = {t.time:2d}  bound = {t.bound:2d}")

# %%
# The open ball of radius ``2**-I`` fixes ``I + 1`` symbols, so the bound is
# ``I + 1`` for every pair.  Disagreement indices are geometric with mean 1.

times = np.array([t.time for t in verdict.trials])
print("pass fraction:", verdict.pass_fraction)
print("mean time:", times.mean(), " max time:", times.max())
print("bound - time = 1 in", sum(t.bound - t.time == 1 for t in verdict.trials), "of", len(verdict.trials))

# %%
# At 90% of that rate the floor of ``0.9 (I + 1)`` drops below ``I`` once
# ``I >= 9``, and those rare pairs fail.

lower = check_restricted_pairwise(shift, SensitivityParams(Fraction(1, 2), 0.9 / math.log(2)), 1000, seed=0)
print("a = 0.9/log 2, pass fraction:", lower.pass_fraction)
