"""How the coherent gain of a partition hardens as the partition grows.

The mean of gamma_kk scales with the partition area while its standard
deviation grows more slowly, so the coefficient of variation falls. That
is what makes a large surface behave almost deterministically.

    python demos/channel_hardening.py
"""

import math

from crisnoma import ACCURATE, CorrelationModel, PartitionLayout, UserLinkParams
from crisnoma.channel_stats import link_stats

F = 28e9
LAM = 299_792_458.0 / F
model = CorrelationModel(wavelength=LAM)
link = UserLinkParams(1.0, 2.0, 4)  # unit amplitude

print(f"{'side / lambda':>14} {'E[gamma]':>12} {'std':>12} {'cv':>8} {'gamma shape':>12}")
for side in (0.5, 1, 2, 4, 8, 16):
    lay = PartitionLayout((side * LAM,), side * LAM)
    s = link_stats([link], lay, model, ACCURATE)[0]
    sd = math.sqrt(s.var_kk)
    print(f"{side:14g} {s.mean_kk:12.4e} {sd:12.4e} {sd / s.mean_kk:8.4f} {s.gamma_shape:12.1f}")
