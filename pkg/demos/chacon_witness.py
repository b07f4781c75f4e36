"""
Chacon's map is not restricted sensitive
========================================

The Chacon transformation cuts each column in three and puts one spacer
over the middle piece.  A tiny interval on the base of a deep column rides
up the column rigidly, so it cannot spread out before the time budget
``floor(-a log 2w)`` runs out.  All arithmetic here is exact.
"""

from restsens import RankOneSystem, chacon, witness_rank_one_failure
from restsens.rank_one import build_columns

system = RankOneSystem(chacon())
print("column heights:", [c.height for c in build_columns(chacon(), 5)])

# %%
# Ask for a witness at ``delta = 0.01`` and ``a = 1``.

w = witness_rank_one_failure(system, 0.01, 1.0)
print(f"stage {w.stage} (height {w.height}), ball ({w.point - w.radius}, {w.point + w.radius})")
print(f"time bound {w.bound}, verified {w.verified}")

# %%
# The diameter of ``T^n`` of the ball stays at ``2w`` the whole time.

for row in w.rows:
    print(f"n = {row['n']:2d}  diameter = {row['diameter']}  pieces = {row['pieces']}")

# %%
# A larger rate needs a deeper column.

w3 = witness_rank_one_failure(system, 0.05, 3.0)
print(f"a = 3: stage {w3.stage}, bound {w3.bound}, max diameter {float(w3.max_diameter):.2e}")
