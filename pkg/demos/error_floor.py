"""Equal allocation hits an error floor; joint optimisation removes it.

With both users at full power and equal partitions, the SIC receiver keeps
confusing the two superimposed constellations no matter how much power is
added. Reallocating partition widths and powers separates the received
levels again.

    python demos/error_floor.py
"""

from pathlib import Path

from crisnoma import parse_scenario
from crisnoma.sweep import sweep

cfg = parse_scenario((Path(__file__).resolve().parents[1] / "scenarios" / "desk.ini").read_text())
grid = list(range(48, 81, 8))
res = sweep(cfg, ["NO", "JO"], grid, mc_trials=0)

_, no = res.total("NO")
_, jo = res.total("JO")
print(f"{'P_max dBm':>10} {'sum BER, NO':>14} {'sum BER, JO':>14}  JO widths / W")
for p, a, b in zip(grid, no, jo):
    widths = next(r.widths for r in res.rows if r.method == "JO" and r.power_dbm == p)
    print(f"{p:10g} {a:14.3e} {b:14.3e}  " + " ".join(f"{w / cfg.width:.3f}" for w in widths))
