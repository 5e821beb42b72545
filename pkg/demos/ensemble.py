"""Monte Carlo ensemble: mean fields, the martingale check and a histogram of
the solution at one cell.

Run with ``python demos/ensemble.py``.
"""

import numpy as np

from sefv import EnsembleSpec, SchemeConfig, build_noise, run_ensemble

# %% 100 independent paths; path i draws its noise from (master_seed, i).
spec = EnsembleSpec(
    n_paths=100,
    master_seed=7,
    levels=(64,),
    noise=build_noise(4, 0.2),
    scheme=SchemeConfig(t_end=0.3),
    n_outputs=3,
    probes=((0.3, (16,)),),
)
res = run_ensemble(spec)
print(f"{res.n_paths} paths, {len(res.aborted)} aborted")

# %% The Ito sum is a martingale, so its ensemble mean sits near zero.
e = res.energy
print(f"Ito sum mean {e['ito_cumulative_mean']:+.3e} +- {e['ito_cumulative_se']:.1e}")
print(f"E(T) - E(0) - correction: {e['balance_mean']:+.3e} +- {e['balance_se']:.1e}")

# %% Spread of the density across paths at the final time.
print("max pointwise std of rho", float(np.sqrt(res.var_rho[-1]).max()))

# %% Empirical distribution of (rho, m) at cell 16.
hist = res.young[0]
print(f"t={hist.t}, cell {hist.cell}: mean {hist.mean}, occupied bins {hist.occupied_bins}")
print("covariance\n", hist.covariance)
