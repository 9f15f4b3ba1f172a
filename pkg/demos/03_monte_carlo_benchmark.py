"""Small Monte Carlo benchmark over replicated synthetic scenarios.

Averages break-detection and support-recovery metrics over a handful of
replications, mirroring the layout of the large simulation tables at a
size that runs in well under a minute.
"""

from covseg import Scenario, TuningGrid
from covseg.experiments import run_replications

scenario = Scenario(setting="I", T=60, p=4, m_star=1, seed=3)
grid = TuningGrid(lambdas=(0.4, 0.8), pairs=((4e-4, 0.4), (4e-4, 0.8)))

table = run_replications(
    scenario, grid, criteria=("hbic", "optimal"), n_reps=5, gap_stride=5
)

print(f"{'criterion':>10} {'nb':>6} {'d_h':>7} {'F1':>6} {'acc':>6} {'rmse':>7}")
for crit in table.criteria:
    m = table.means[crit]
    print(
        f"{crit:>10} {m['nb']:6.2f} {m['d_h']:7.2f} {m['f1']:6.3f} "
        f"{m['acc']:6.3f} {m['rmse']:7.3f}"
    )
print(f"failures per criterion: {table.n_failed}")
