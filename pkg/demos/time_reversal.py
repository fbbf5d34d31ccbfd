"""
Running the coupled system backwards
====================================

The equations are time reversible. We evolve to t = 1, turn the field at
that moment into fresh initial data and step back to t = 0 with a
negative step.
"""

import numpy as np

from nordvlasov import SimConfig, Simulation
from nordvlasov.core import gaussian_bump
from nordvlasov.kinetic import reversed_simulation

data = gaussian_bump()
cfg = SimConfig(t_final=1.0)
sim = Simulation(cfg, data)
start = sim.state.ens
for forward in sim.run():
    pass

back = reversed_simulation(sim)
for backward in back.run(cfg.n_steps):
    pass
print(f"returned to t = {backward.t:.1e}")
print(f"largest position error {np.max(np.abs(backward.ens.x - start.x)):.2e}")
print(f"largest momentum error {np.max(np.abs(backward.ens.p - start.p)):.2e}")

# %%
# For scale: the forward integration error itself, estimated by halving
# dx and dt on the same particles.

fine = Simulation(cfg.refined(), data, ensemble=start)
for fine_state in fine.run():
    pass
print(f"forward integrator error {4 / 3 * np.max(np.abs(fine_state.ens.x - forward.ens.x)):.2e}")
