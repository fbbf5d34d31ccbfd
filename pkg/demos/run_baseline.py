"""
A coupled run with every monitor switched on
============================================

A smooth lump of matter sits in a weak scalar field. We let it evolve
to t = 2 and watch what the solver promises to keep fixed.
"""

import sys
from pathlib import Path

from nordvlasov import CasimirSpec, Simulation, load_config, make_initial_data
from nordvlasov.diagnostics import Monitor

cfg = load_config(str(Path(__file__).resolve().parents[1] / "configs" / "baseline.cfg"))
data = make_initial_data(cfg)
sim = Simulation(cfg, data)
print(f"{len(sim.state.ens)} particles, nx = {cfg.nx}, {cfg.n_steps} steps of {cfg.step:.4f}")

# %%
# The monitor records one row per step: masses, energies, Casimirs, the
# slack of each a-priori bound and the local conservation residuals.

mon = Monitor(CasimirSpec(2.0, 0.0), data.support_radius, cfg.casimir_q)
for state in sim.run():
    mon.update(state)
mon.finish()

first, last = mon.records[0], mon.records[-1]
print(f"particle mass  {first.mass_particle!r} -> {last.mass_particle!r}")
print(f"grid mass      {first.mass_grid:.10f} -> {last.mass_grid:.10f}")
print(f"total energy   {first.energy_total:.10f} -> {last.energy_total:.10f}")
print(f"max psi over the run: {max(r.psi_max for r in mon.records)!r}")

# %%
# Particle sums are built from frozen invariants, so they do not move at
# all. Grid quantities drift at the level of the discretization error.

for name, val in mon.drifts().items():
    print(f"relative drift of {name}: {val:.2e}")

ok = True
for check in mon.checks():
    ok &= check.passed
    print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
sys.exit(0 if ok else 1)
