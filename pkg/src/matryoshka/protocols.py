"""The three experiment protocols: defect transfer, Y-junction braiding, memory.

Transfer moves the 3-site defect (unit dimer + isolated site) of a 7-site
sine-cosine chain from one end to the other by ramping the three bond angles
between the endpoint configurations

    theta_1: pi/2 -> pi/2 - lambda,  theta_2: 0 -> pi/2,  theta_3: lambda -> gamma,

carrying the epsilon = +1, -1, 0 defect states simultaneously. Braiding
composes three such moves on a Y junction to exchange two defects, and the
gate is read off in the six-dimensional defect basis. The memory protocol
Rabi-transfers a qubit amplitude into a chain edge state and back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .disorder import DisorderSpec, EnsembleProtocol, _offsets_for, realization_rng
from .dynamics import (PiecewiseLinear, Schedule, ScheduledHamiltonian,
                       evolve, fidelity, min_gap)
from .errors import (ConfigurationError, EdgeStateNotFoundError, ProtocolError)
from .lattice import (ChainSpec, LegSpec, Lattice, MemorySpec, QubitSpec,
                      YJunctionSpec, build_chain, build_memory_system,
                      build_y_junction, chain_bond_specs, y_junction_bond_specs)
from .spectral import detect_edge_states, diagonalize

DEFAULT_LAMBDA = np.pi / 3
DEFAULT_T = 200.0
DEFAULT_STEPS = 4000


# --------------------------------------------------------------------------
# defect basis


@dataclass
class DefectBasis:
    """|1..6> = {|e=+1;L/R>, |e=-1;L/R>, |e=0;L/R>} as site-amplitude vectors."""

    states: np.ndarray  # (6, n_sites)
    labels: tuple = ("eps=+1,L", "eps=+1,R", "eps=-1,L", "eps=-1,R",
                     "eps=0,L", "eps=0,R")

    def __post_init__(self):
        G = self.states @ self.states.T.conj()
        if np.abs(G - np.eye(6)).max() > 1e-12:
            raise ConfigurationError("defect basis is not orthonormal")

    @classmethod
    def for_chain(cls, n_sites: int = 7) -> "DefectBasis":
        """Left defect on sites (0,1,2), right defect on (n-3, n-2, n-1)."""
        if n_sites < 7:
            raise ConfigurationError("chain defect basis needs >= 7 sites")
        B = np.zeros((6, n_sites))
        left = (0, 1, 2)
        right = (n_sites - 3, n_sites - 2, n_sites - 1)
        for col, (sites, eps) in enumerate(
                [(left, 1), (right, 1), (left, -1), (right, -1), (left, 0), (right, 0)]):
            if eps == 0:
                # isolated defect site: innermost on the left, innermost on the right
                B[col, sites[2] if sites == left else sites[0]] = 1.0
            else:
                o, m = (sites[0], sites[1]) if sites == left else (sites[2], sites[1])
                B[col, o] = 1 / np.sqrt(2)
                B[col, m] = eps / np.sqrt(2)
        return cls(B)

    @classmethod
    def for_junction(cls, junction: Lattice, legs=(0, 1)) -> "DefectBasis":
        """Defect states on two legs of a 3-site-leg junction (outer, mid, inner)."""
        B = np.zeros((6, junction.n_sites))
        offsets = _leg_site_offsets(junction)
        for col, (which, eps) in enumerate(
                [(0, 1), (1, 1), (0, -1), (1, -1), (0, 0), (1, 0)]):
            o = offsets[legs[which]]
            if eps == 0:
                B[col, o + 2] = 1.0
            else:
                B[col, o] = 1 / np.sqrt(2)
                B[col, o + 1] = eps / np.sqrt(2)
        return cls(B)


def _leg_site_offsets(junction: Lattice):
    """First site index of each leg (center is site 0, legs appended in order)."""
    offsets = []
    for L in range(3):
        idx = junction.sites.index(f"L{L}:0")
        offsets.append(idx)
    return offsets


# --------------------------------------------------------------------------
# transfer


@dataclass(frozen=True)
class TransferProtocol:
    """Defect transfer along a single chain.

    level 0 is the 3-site SSH parent (one angle ramped 0 -> pi/2); level 1
    is the 7-site sine-cosine chain with the three-angle schedule above.
    gamma in {0, pi} selects the final bonding/antibonding convention;
    lambda_ is the free inner angle, strictly inside (0, pi/2).
    """

    level: int = 1
    lambda_: float = DEFAULT_LAMBDA
    gamma: float = 0.0
    duration: float = DEFAULT_T
    n_steps: int = DEFAULT_STEPS
    initial_side: str = "left"

    def __post_init__(self):
        if self.level not in (0, 1):
            raise ConfigurationError(
                "transfer schedules are defined for level 0 (SSH parent) and "
                "level 1 (7-site chain) only")
        if not 0 < self.lambda_ < np.pi / 2:
            raise ConfigurationError("lambda must lie strictly inside (0, pi/2)")
        if self.gamma not in (0.0, np.pi):
            raise ConfigurationError("gamma must be 0 or pi")
        if self.initial_side not in ("left", "right"):
            raise ConfigurationError("initial_side must be 'left' or 'right'")

    @property
    def n_sites(self) -> int:
        return 7 if self.level == 1 else 3

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps


def transfer_system(p: TransferProtocol) -> ScheduledHamiltonian:
    """Scheduled Hamiltonian of the transfer chain (left-starting orientation)."""
    T = p.duration
    if p.level == 0:
        spec = ChainSpec(order=0, angles=(0.0,), cells=2, total_sites=3)
        bonds, _ = chain_bond_specs(spec)
        curves = {"theta_1": PiecewiseLinear([0, T], [0.0, np.pi / 2])}
    else:
        spec = ChainSpec(order=1, angles=(np.pi / 2, 0.0), cells=2, total_sites=7)
        bonds, _ = chain_bond_specs(spec)
        # bond pattern on 7 sites: sin t1, cos t1, sin t2, cos t2, sin t1, cos t1
        # -- the third angle pair needs its own parameter, so rebind bonds 4,5
        from .lattice import BondSpec
        bonds = list(bonds)
        bonds[4] = BondSpec(4, 5, "theta_3", "sin", 1.0)
        bonds[5] = BondSpec(5, 6, "theta_3", "cos", 1.0)
        curves = {
            "theta_1": PiecewiseLinear([0, T], [np.pi / 2, np.pi / 2 - p.lambda_]),
            "theta_2": PiecewiseLinear([0, T], [0.0, np.pi / 2]),
            "theta_3": PiecewiseLinear([0, T], [p.lambda_, p.gamma]),
        }
    sched = Schedule(T, p.dt, curves)
    return ScheduledHamiltonian(p.n_sites, bonds, sched)


def transfer_channels(p: TransferProtocol):
    """(label, eps, psi0, psi_expected) per transported channel, left start."""
    if p.level == 0:
        psi0 = np.zeros(3)
        psi0[0] = 1.0
        psie = np.zeros(3)
        psie[2] = -1.0
        return [("eps=0", 0.0, psi0, psie)]
    out = []
    cg = np.cos(p.gamma)
    for eps in (1.0, -1.0):
        psi0 = np.zeros(7)
        psi0[0] = eps / np.sqrt(2)   # (eps,1,0,...)/sqrt2: bonding/antibonding on the first dimer
        psi0[1] = 1 / np.sqrt(2)
        psie = np.zeros(7)
        psie[5] = -1 / np.sqrt(2)
        psie[6] = -eps * cg / np.sqrt(2)
        out.append((f"eps={int(eps):+d}", eps, psi0, psie))
    psi0 = np.zeros(7)
    psi0[2] = 1.0
    psie = np.zeros(7)
    # gamma = 0: pi shift; gamma = pi: theta_3 sweeps through pi/2, where the
    # zero mode's support crosses the chain end and the sign flips back
    psie[4] = -cg
    out.append(("eps=0", 0.0, psi0, psie))
    return out


@dataclass
class TransferResult:
    fidelities: dict
    phases: dict            # overlap * exp(+i eps T): ~ +1 when the sign pattern holds
    final_states: dict
    min_gaps: np.ndarray    # per adjacent pair, minimum over the sweep
    initial_gaps: np.ndarray  # adjacent gaps of the endpoint configuration
    warnings: list = field(default_factory=list)


def run_transfer(p: TransferProtocol, disorder: DisorderSpec | None = None,
                 realization: int = 0) -> TransferResult:
    """Run all defect channels through the sweep.

    Fidelities are phase-adjusted (|<expected|psi>|^2, insensitive to the
    dynamical phase); `phases` carries overlap * e^{+i eps T}, which lands on
    +1 when both the adiabatic sign pattern and the e^{-i eps T} dynamical
    phase come out as predicted.
    """
    system = transfer_system(p)
    offsets = {}
    if disorder is not None:
        offsets = _offsets_for(system, disorder, realization_rng(disorder.seed, realization))
    gaps = min_gap(system, **offsets)
    H0 = system.hamiltonian_at(0.0, **offsets)
    initial_gaps = np.diff(np.linalg.eigvalsh(H0))
    # a right-starting transfer is the site-mirror image of the left one:
    # H_right(t) = M H_left(t) M, so overlaps coincide and only the reported
    # state vectors need mirroring
    mirror = p.initial_side == "right"
    result = TransferResult({}, {}, {}, gaps, initial_gaps)
    if gaps.min() * p.duration < 20.0:
        result.warnings.append(
            f"adiabaticity marginal: min gap {gaps.min():.3g} * T = "
            f"{gaps.min() * p.duration:.3g} < 20")
    for label, eps, psi0, psie in transfer_channels(p):
        traj = evolve(system, psi0.astype(complex), **offsets)
        ov = np.vdot(psie, traj.final)
        result.fidelities[label] = float(abs(ov) ** 2)
        result.phases[label] = complex(ov * np.exp(1j * eps * p.duration))
        result.final_states[label] = traj.final[::-1].copy() if mirror else traj.final
    return result


def transfer_ensemble_protocol(p: TransferProtocol, channel: str = "eps=+1") -> EnsembleProtocol:
    """EnsembleProtocol for a single transfer channel (disorder studies)."""
    system = transfer_system(p)
    for label, eps, psi0, psie in transfer_channels(p):
        if label == channel:
            return EnsembleProtocol(system, psi0.astype(complex),
                                    psie.astype(complex), label=f"transfer:{label}")
    raise ConfigurationError(f"unknown transfer channel {channel!r}")


# --------------------------------------------------------------------------
# braiding


PARKED = (np.pi / 2, 0.0)


def braid_junction_spec(lambda_: float = DEFAULT_LAMBDA) -> YJunctionSpec:
    """Initial braid configuration: defects parked on legs 0 and 1, leg 2 open."""
    open_leg = (np.pi / 2 - lambda_, np.pi / 2)
    return YJunctionSpec((LegSpec(PARKED), LegSpec(PARKED), LegSpec(open_leg)))


def _braid_lambda(junction: YJunctionSpec) -> float:
    """Recover lambda from the open leg and validate the parked defects."""
    for L in (0, 1):
        th = junction.legs[L].angles
        if junction.legs[L].n_sites != 3 or abs(th[0] - np.pi / 2) > 1e-9 or abs(th[1]) > 1e-9:
            raise ProtocolError(
                f"leg {L} must hold a parked defect (angles (pi/2, 0)); "
                "defects would overlap during motion otherwise")
    th2 = junction.legs[2].angles
    if junction.legs[2].n_sites != 3 or abs(th2[1] - np.pi / 2) > 1e-9:
        raise ProtocolError("leg 2 must be the open track (theta_2 = pi/2)")
    lam = np.pi / 2 - th2[0]
    if not 0 < lam < np.pi / 2:
        raise ProtocolError("open-leg angle implies lambda outside (0, pi/2)")
    return lam


def braid_system(junction: YJunctionSpec, T_leg: float = DEFAULT_T,
                 n_steps_leg: int = DEFAULT_STEPS) -> ScheduledHamiltonian:
    """Three sequential leg moves: 0->2, 1->0, 2->1, each of duration T_leg.

    Every leg angle is piecewise linear with knots at the move boundaries;
    parked legs are frozen. Only the gamma = 0 convention is scheduled (each
    received defect re-parks at (pi/2, 0)).
    """
    lam = _braid_lambda(junction)
    lat = build_y_junction(junction)
    bonds, _ = y_junction_bond_specs(junction)
    T = T_leg
    knots = [0.0, T, 2 * T, 3 * T]
    a, b = np.pi / 2, np.pi / 2 - lam
    curves = {
        "leg0_theta1": PiecewiseLinear(knots, [a, b, a, a]),
        "leg0_theta2": PiecewiseLinear(knots, [0, np.pi / 2, 0, 0]),
        "leg1_theta1": PiecewiseLinear(knots, [a, a, b, a]),
        "leg1_theta2": PiecewiseLinear(knots, [0, 0, np.pi / 2, 0]),
        "leg2_theta1": PiecewiseLinear(knots, [b, a, a, b]),
        "leg2_theta2": PiecewiseLinear(knots, [np.pi / 2, 0, 0, np.pi / 2]),
    }
    sched = Schedule(3 * T, T / n_steps_leg, curves)
    return ScheduledHamiltonian(lat.n_sites, bonds, sched)


@dataclass
class GateReport:
    """Extracted 6x6 operator in the defect basis, with per-sector analysis.

    leakage: 1 - column norm within the basis (probability lost outside).
    off_block_leakage: probability per column outside its energy sector.
    sector_phases: fitted global phase of each 2x2 block (+1, -1, 0 order).
    aligned_blocks: blocks with the fitted phase divided out.
    block_tags: 'y_type' ([[0,-1],[1,0]]), 'x_type' ([[0,1],[1,0]]) or 'other'.
    block_errors: max entrywise deviation of the aligned block from its tag.
    notes: flags where the measured blocks deviate from naive composition.
    """

    matrix: np.ndarray
    leakage: np.ndarray
    off_block_leakage: np.ndarray
    sector_phases: list
    aligned_blocks: list
    block_tags: list
    block_errors: list
    notes: list = field(default_factory=list)


_Y_TYPE = np.array([[0.0, -1.0], [1.0, 0.0]])
_X_TYPE = np.array([[0.0, 1.0], [1.0, 0.0]])


def extract_gate(final_states: np.ndarray, basis: DefectBasis,
                 total_time: float | None = None) -> GateReport:
    """Overlap matrix U[i, j] = <basis_i | psi_j(end)> plus sector analysis.

    Per sector, a single global phase is fitted (trace alignment against the
    better-matching of the Y/X patterns) and reported; the residual entrywise
    deviation is what `block_errors` carries.
    """
    U = basis.states.conj() @ final_states.T  # final_states: (6, n)
    leakage = 1.0 - (np.abs(U) ** 2).sum(axis=0)
    off = U.copy()
    sectors = [slice(0, 2), slice(2, 4), slice(4, 6)]
    for sl in sectors:
        off[sl, sl] = 0.0
    off_leak = (np.abs(off) ** 2).sum(axis=0)
    phases, blocks, tags, errs = [], [], [], []
    for sl in sectors:
        blk = U[sl, sl]
        best = None
        for tag, target in (("y_type", _Y_TYPE), ("x_type", _X_TYPE)):
            tr = np.trace(target.T @ blk)
            ph = tr / abs(tr) if abs(tr) > 1e-12 else 1.0
            err = np.abs(blk / ph - target).max()
            if best is None or err < best[2]:
                best = (tag, ph, err)
        tag, ph, err = best
        if err > 0.1:
            tag = "other"
        phases.append(complex(ph))
        blocks.append(blk / ph)
        tags.append(tag)
        errs.append(float(err))
    report = GateReport(U, leakage, off_leak, phases, blocks, tags, errs)
    if tags[1] != "x_type":
        report.notes.append(
            "eps=-1 sector measures antisymmetric (y_type): the defect dimer's "
            "orientation reverses on each single center pass, which a naive "
            "per-move sign composition (X-type) does not account for")
    report.notes.append(
        "eps=0 block: the naive per-move sign composition is not unitary for "
        "this sector; the measured block is reported instead")
    if total_time is not None:
        expected = [np.exp(-1j * total_time), np.exp(+1j * total_time), 1.0]
        report.notes.append(
            "expected bare dynamical sector phases: "
            + ", ".join(f"{p:.6f}" for p in expected))
    return report


def run_braiding(junction: YJunctionSpec, T_leg: float = DEFAULT_T,
                 disorder: DisorderSpec | None = None, realization: int = 0,
                 n_steps_leg: int = DEFAULT_STEPS) -> GateReport:
    """Evolve all six defect-basis states through the three-move braid."""
    system = braid_system(junction, T_leg, n_steps_leg)
    lat = build_y_junction(junction)
    basis = DefectBasis.for_junction(lat)
    offsets = {}
    if disorder is not None:
        offsets = _offsets_for(system, disorder, realization_rng(disorder.seed, realization))
    finals = np.empty((6, lat.n_sites), complex)
    for j in range(6):
        traj = evolve(system, basis.states[j].astype(complex), **offsets)
        finals[j] = traj.final
    return extract_gate(finals, basis, total_time=3 * T_leg)


def braiding_ensemble_protocol(lambda_: float = DEFAULT_LAMBDA,
                               T_leg: float = DEFAULT_T,
                               n_steps_leg: int = DEFAULT_STEPS) -> EnsembleProtocol:
    """Fig-8-style ensemble: (|+1,L> + |+1,R>)/sqrt2 -> (-|+1,L> + |+1,R>)/sqrt2."""
    junction = braid_junction_spec(lambda_)
    system = braid_system(junction, T_leg, n_steps_leg)
    lat = build_y_junction(junction)
    basis = DefectBasis.for_junction(lat)
    psi0 = (basis.states[0] + basis.states[1]) / np.sqrt(2)
    psie = (-basis.states[0] + basis.states[1]) / np.sqrt(2)
    return EnsembleProtocol(system, psi0.astype(complex), psie.astype(complex),
                            label="braiding")


# --------------------------------------------------------------------------
# memory


@dataclass(frozen=True)
class MemoryProtocol:
    """Square-pulse store/wait/retrieve sequence on a memory system.

    tau = None means calibrate numerically: scan the coupled evolution for
    the first minimum of the qubit population (the naive two-level value is
    pi/(2 u_eff), but leakage and attachment overlap shift it).
    """

    memory: MemorySpec
    tau: float | None = None
    t_waits: tuple[float, ...] = (0.0,)
    pulse: str = "square"
    qubit_index: int = 0

    def __post_init__(self):
        if self.pulse != "square":
            raise ConfigurationError("only square u(t) pulses are implemented")
        if self.tau is not None and self.tau <= 0:
            raise ConfigurationError("tau must be positive")
        if any(t < 0 for t in self.t_waits):
            raise ConfigurationError("t_wait must be >= 0")


@dataclass
class MemoryResult:
    t_waits: np.ndarray
    fidelities: np.ndarray
    tau: float
    edge_energy: float
    edge_splitting: float
    first_minimum_expected: float   # pi / splitting: two-level beat cos^2(deps*t/2)
    half_period_estimate: float    # pi / (2 splitting): half the max-to-min time
    measured_first_minimum: float | None = None
    store_efficiency: float = 0.0   # probability out of the qubit after tau


def _memory_matrices(mem: MemorySpec, qubit_index: int):
    lat = build_memory_system(mem)
    n = lat.n_sites
    H_on = lat.hamiltonian
    params_off = dict(lat.params)
    params_off[f"u_{qubit_index}"] = 0.0
    H_off = np.zeros((n, n))
    for b in lat.bonds:
        v = b.value(params_off)
        H_off[b.i, b.j] += v
        H_off[b.j, b.i] += v
    return lat, H_on, H_off


def _spectral_propagator(H):
    w, V = np.linalg.eigh(H)

    def prop(psi, t):
        return V @ (np.exp(-1j * w * t) * (V.T @ psi))

    return prop


def _qubit_initial_state(mem: MemorySpec, qubit_index: int, n_total: int):
    qb = mem.qubits[qubit_index]
    n_chain = build_chain(mem.chain).n_sites
    i0 = n_chain + 2 * qubit_index
    psi = np.zeros(n_total, complex)
    if abs(qb.internal_hopping) < 1e-12:
        psi[i0] = 1.0
    else:
        sgn = 1.0 if qb.target_energy >= 0 else -1.0
        psi[i0] = 1 / np.sqrt(2)
        psi[i0 + 1] = sgn / np.sqrt(2)
    return psi, (i0, i0 + 1)


def calibrate_tau(prop_on, psi0, qsites, u: float) -> tuple[float, float]:
    """First minimum of the qubit population under the coupled Hamiltonian."""
    guess = np.pi / (2 * abs(u))

    def qubit_pop(t):
        psi = prop_on(psi0, t)
        return abs(psi[qsites[0]]) ** 2 + abs(psi[qsites[1]]) ** 2

    ts = np.linspace(0.2 * guess, 4.0 * guess, 240)
    pops = np.array([qubit_pop(t) for t in ts])
    # first local minimum that actually empties the qubit, not the global one
    # (later Rabi zeros are equally deep but waste storage bandwidth)
    k = None
    for i in range(1, len(ts) - 1):
        if pops[i] < 0.5 and pops[i] <= pops[i - 1] and pops[i] <= pops[i + 1]:
            k = i
            break
    if k is None:
        k = int(np.argmin(pops))
    if pops[k] > 0.5:
        raise EdgeStateNotFoundError(
            "qubit population never drops below 0.5: no resonant edge state "
            "matches the qubit energy")
    lo = ts[max(0, k - 1)]
    hi = ts[min(len(ts) - 1, k + 1)]
    res = minimize_scalar(qubit_pop, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


def run_memory(p: MemoryProtocol) -> MemoryResult:
    """Store for tau, hold for t_wait (decoupled), retrieve for tau.

    All three stages use exact spectral propagation of the static coupled /
    decoupled Hamiltonians, so arbitrarily long storage times cost nothing
    (this is what makes the hybridized splitting ~ 1e-6 cases tractable).
    """
    mem = p.memory
    qb = mem.qubits[p.qubit_index]
    lat, H_on, H_off = _memory_matrices(mem, p.qubit_index)
    prop_on = _spectral_propagator(H_on)
    prop_off = _spectral_propagator(H_off)
    psi0, qsites = _qubit_initial_state(mem, p.qubit_index, lat.n_sites)

    # edge pair bookkeeping on the bare chain
    chain = build_chain(mem.chain)
    E = np.linalg.eigvalsh(chain.hamiltonian)
    pair = E[np.argsort(np.abs(E - qb.target_energy))[:2]]
    deps = float(abs(pair[1] - pair[0]))
    eps_edge = float(pair.mean())

    if qb.coupling == 0.0:
        tau = p.tau or 0.0
        resid = 1.0
    elif p.tau is None:
        tau, resid = calibrate_tau(prop_on, psi0, qsites, qb.coupling)
    else:
        tau = p.tau
        psi_s = prop_on(psi0, tau)
        resid = abs(psi_s[qsites[0]]) ** 2 + abs(psi_s[qsites[1]]) ** 2

    psi_stored = prop_on(psi0, tau)
    t_waits = np.asarray(p.t_waits, float)
    F = np.empty(len(t_waits))
    for i, tw in enumerate(t_waits):
        psi = prop_off(psi_stored, tw)
        psi = prop_on(psi, tau)
        F[i] = fidelity(psi0, psi)
    first_min = None
    if len(t_waits) > 2:
        first_min = float(t_waits[int(np.argmin(F))])
    return MemoryResult(
        t_waits, F, tau, eps_edge, deps,
        first_minimum_expected=np.pi / deps if deps > 1e-12 else np.inf,
        half_period_estimate=np.pi / (2 * deps) if deps > 1e-12 else np.inf,
        measured_first_minimum=first_min,
        store_efficiency=1.0 - resid,
    )


def memory_spec_for_edge(chain: ChainSpec, target_energy: float, coupling: float,
                         tune_internal: bool = True) -> MemorySpec:
    """Standard qubit attachment for a +-1 or 0 edge channel.

    eps = 0 targets attach to the first site only; finite-energy targets
    attach to the first two sites with equal weights and the symmetric /
    antisymmetric sign. The internal hopping is tuned to the measured edge
    energy (resonance), or set to |target| when tuning is off.
    """
    lat = build_chain(chain)
    E = np.linalg.eigvalsh(lat.hamiltonian)
    pair = E[np.argsort(np.abs(E - target_energy))[:2]]
    eps_meas = float(pair.mean()) if abs(target_energy) > 1e-9 else 0.0
    k = abs(eps_meas) if tune_internal else abs(target_energy)
    if abs(target_energy) < 1e-9:
        attachments = ((0, 1.0),)
        k = 0.0
    else:
        s = 1.0 if target_energy > 0 else -1.0
        attachments = ((0, 1 / np.sqrt(2)), (1, s / np.sqrt(2)))
    qb = QubitSpec(internal_hopping=k, coupling=coupling,
                   attachments=attachments, target_energy=eps_meas)
    return MemorySpec(chain, (qb,))


# --------------------------------------------------------------------------
# qudit memory (one qubit per protected defect channel)


@dataclass
class QuditChannelResult:
    energy: float
    tau: float
    fidelity: float
    store_efficiency: float


@dataclass
class QuditMemoryResult:
    n_edge_states: int
    channels: list


def multigap_chain_spec() -> ChainSpec:
    """80-site mirrored sine-cosine chain with angles (pi/6, pi/4, pi/6, 0)."""
    return ChainSpec(order=2, angles=(np.pi / 6, np.pi / 4, np.pi / 6, 0.0),
                     cells=10, total_sites=80, mirror=True)


def left_defect_block(lat: Lattice, n_defect: int = 7) -> np.ndarray:
    return lat.hamiltonian[:n_defect, :n_defect]


def defect_channel_weights(lat: Lattice, target_energy: float,
                           n_defect: int = 7) -> tuple[np.ndarray, float]:
    """Left-defect-block eigenstate closest to the target energy.

    Raises ConfigurationError if the candidate is not an eigenstate of the
    defect block (the block must be cleanly decoupled from the bulk).
    """
    blk = left_defect_block(lat, n_defect)
    if np.abs(lat.hamiltonian[:n_defect, n_defect:]).max() > 1e-12:
        raise ConfigurationError("left defect block is not decoupled from the bulk")
    w, V = np.linalg.eigh(blk)
    k = int(np.argmin(np.abs(w - target_energy)))
    vec = V[:, k]
    resid = np.abs(blk @ vec - w[k] * vec).max()
    if resid > 1e-10:
        raise ConfigurationError(f"defect eigenstate residual {resid:.2e}")
    return vec, float(w[k])


def run_qudit_memory(chain: ChainSpec | None = None, coupling: float = 0.01,
                     target_energies=(0.0,), t_wait: float = 10.0,
                     n_defect: int = 7) -> QuditMemoryResult:
    """Store/retrieve one channel at a time on the multi-gap chain.

    Per channel: attachment weights are the defect-block eigenstate, the
    qubit's internal hopping is |eps| (resonant by construction), tau is
    calibrated, and the retrieval fidelity at `t_wait` is reported.
    """
    chain = chain or multigap_chain_spec()
    lat = build_chain(chain)
    spec = diagonalize(lat)
    report = detect_edge_states(spec, lat)
    channels = []
    for eps_t in target_energies:
        vec, eps = defect_channel_weights(lat, eps_t, n_defect)
        attachments = tuple((i, float(vec[i])) for i in range(n_defect)
                            if abs(vec[i]) > 1e-14)
        qb = QubitSpec(internal_hopping=abs(eps), coupling=coupling,
                       attachments=attachments, target_energy=eps)
        mem = MemorySpec(chain, (qb,))
        res = run_memory(MemoryProtocol(mem, t_waits=(t_wait,)))
        channels.append(QuditChannelResult(eps, res.tau, float(res.fidelities[0]),
                                           res.store_efficiency))
    return QuditMemoryResult(len(report), channels)
