"""Binary contingency table: the bundled Rochdale household survey.

Eight yes/no variables on 665 households.  We fit the probit and the copula
single-factor graphical models, then predict the five most populated cells
by Monte Carlo over the posterior.  The budget here is small; raise
ITERATIONS for tighter estimates.

    python3 demos/rochdale_cells.py
"""
from importlib.resources import files

import numpy as np

from singlefactor.latent import (expected_cell_counts, fit_latent, read_contingency_table,
                                 table_to_dataset)
from singlefactor.numerics import make_rng
from singlefactor.sfgm import posterior_summaries

ITERATIONS, BURN_IN = 2000, 500

names, levels, counts = read_contingency_table(files("singlefactor") / "data" / "rochdale.txt")
X = table_to_dataset(counts)
obs = counts.ravel()
top = np.argsort(-obs, kind="stable")[:5]

for mode in ("probit", "copula"):
    trace = fit_latent(X, mode, iterations=ITERATIONS, burn_in=BURN_IN, seed=0)
    E = expected_cell_counts(trace, X.n, make_rng(1), thin=5).ravel()
    s = posterior_summaries(trace)
    print("\n%s model" % mode)
    print("  cell      observed  expected")
    for i in top:
        print("  %s  %8d  %8.2f" % (format(int(i), "08b"), obs[i], E[i]))
    print("  median graph:", ["%s-%s" % (names[a - 1], names[b - 1])
                              for a, b in s["median_graph"].edges])
    print("  B10 per variable:", {names[b.variable - 1]: round(b.value, 1)
                                  for b in s["bayes_factors"]})
