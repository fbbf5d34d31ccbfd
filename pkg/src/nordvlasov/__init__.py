"""Slab-symmetric Nordström-Vlasov simulator and its verification tools."""

from .core import (CasimirSpec, Ensemble, InitialData, KineticParticle,
                   SimConfig, load_config, make_initial_data, sample_ensemble,
                   validate_config)
from .errors import *  # noqa: F401,F403
from .kinetic import MomentGrids, Simulation, SimState, deposit, push
from .wavefield import (FieldSlice, Mollifier, MuHistory, assemble_field,
                        duhamel_psi, eval_phi_hom, mollify)

__version__ = "0.1.0"
