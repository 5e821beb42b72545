"""Mesh refinement: deterministic errors against a forced exact solution,
then Cesaro means of one noise path across four meshes.

Run with ``python demos/refinement.py``.
"""

import numpy as np

from sefv import EnsembleSpec, SchemeConfig, build_noise, cesaro_study, convergence_study

# %% Without noise the sine wave plus a pressure-gradient source is an exact
# solution, so the L1 errors can be measured directly.
spec = EnsembleSpec(levels=(32, 64, 128, 256), noise=build_noise(0), scheme=SchemeConfig(t_end=0.25), n_outputs=1)
table = convergence_study(spec, "manufactured")
print(table.to_csv())
print("observed L1 density rates", np.round(table.rates["L1_rho"], 3))

# %% With noise there is no exact solution. All four meshes are driven by the
# same Brownian path, and the running averages of their final densities
# settle down as meshes are added.
noisy = EnsembleSpec(levels=(16, 32, 64, 128), master_seed=1, noise=build_noise(4, 0.05), scheme=SchemeConfig(t_end=0.25), n_outputs=1)
study = cesaro_study(noisy, path=0)
print("fine time step", study.coupled.dt_fine)
for n, inc in zip(range(2, 5), study.increments):
    print(f"||C_{n} - C_{n - 1}||_1 = {inc:.3e}")
