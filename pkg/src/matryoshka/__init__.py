"""Matryoshka sine-cosine topological chains: lattices, spectra, dynamics,
disorder ensembles, and the transfer / braiding / memory protocols."""

from ._backend import BACKEND, NUMBA_AVAILABLE
from .disorder import DisorderSpec, EnsembleProtocol, EnsembleStats, NoiseCurve, \
    apply_disorder, run_ensemble, sample_noise
from .dynamics import (PiecewiseLinear, Schedule, ScheduledHamiltonian, StepCurve,
                       Trajectory, bloch_evolve, ensemble_entropy, evolve, fidelity,
                       min_gap, nonadiabatic_coupling)
from .errors import (ConfigurationError, EdgeStateNotFoundError, InfeasibleLiftError,
                     IntegratorError, MatryoshkaError, ProtocolError, StructureError)
from .lattice import (ChainSpec, Lattice, LegSpec, MemorySpec, QubitSpec,
                      YJunctionSpec, build_chain, build_memory_system,
                      build_y_junction, lift_angles, lift_residual,
                      square_hamiltonian)
from .protocols import (DefectBasis, GateReport, MemoryProtocol, MemoryResult,
                        TransferProtocol, TransferResult, braid_junction_spec,
                        braiding_ensemble_protocol, extract_gate,
                        memory_spec_for_edge, run_braiding, run_memory,
                        run_qudit_memory, run_transfer)
from .spectral import (EdgeStateReport, Spectrum, bloch_bands, detect_edge_states,
                       diagonalize, dispersion_closed_form, edge_energies)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
