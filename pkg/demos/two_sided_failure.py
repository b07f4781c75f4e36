"""
Why the two-sided shift is not pairwise sensitive
=================================================

For the two-sided shift, points that agree on a long block *to the right*
of the origin stay close for as long as that block lasts, while the ball
around them is already small because of the left coordinates.  A witness
cylinder makes this concrete.
"""

from fractions import Fraction

from restsens import BernoulliShift, ProbabilityVector, SensitivityParams, witness_two_sided_failure
from restsens import check_restricted_pairwise

shift = BernoulliShift(ProbabilityVector.uniform(2), two_sided=True)
sigma = shift.sample_point(1)
delta, a = Fraction(9, 10), 5.0

w = witness_two_sided_failure(shift, sigma, delta, a)
print(f"ball radius 2^-{w.k1}, ball measure {w.ball_measure}, bound {w.bound}")
print(f"cylinder fixes indices {w.cylinder.lo}..{w.cylinder.lo + len(w.cylinder.symbols) - 1}")

# %%
# Every point of the cylinder stays within ``delta`` of ``sigma`` up to the
# bound.  The rows hold the exact envelope at each time.

for row in w.rows[:6]:
    print(row["n"], row["max_distance"], "<", delta)
print("...", len(w.rows), "rows, verified:", w.verified)

# %%
# Feed one partner from the cylinder to the pairwise check: it fails.

tau = shift.sample_point(2).with_symbols(w.cylinder.lo, w.cylinder.symbols)
v = check_restricted_pairwise(shift, SensitivityParams(delta, a), 0, 0, pairs=[(sigma, tau)])
print("pair passes:", v.passed, " first sensitive time:", v.trials[0].time)
