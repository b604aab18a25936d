"""Smooth time-dependent disorder families and seeded ensemble experiments.

Three families, matching how they enter the Hamiltonian:

* ``onsite``: one independent noise curve added to every diagonal entry,
* ``hopping``: one independent curve added to every bond value,
* ``correlated_angle``: one curve per *angle parameter*, added to the angle
  before the sin/cos pair is evaluated (so the pair stays correlated and
  chiral symmetry is preserved).

Each curve is a natural cubic spline through Normal(0, sigma^2) draws at
uniformly spaced knots spanning the schedule, endpoints included.
Realizations use counter-derived child streams of one master seed, so the
ensemble is reproducible regardless of execution order or thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .dynamics import ScheduledHamiltonian, Trajectory, entropy_of_density, evolve
from .errors import ConfigurationError, IntegratorError
from .lattice import Lattice

KINDS = ("onsite", "hopping", "correlated_angle")


@dataclass(frozen=True)
class DisorderSpec:
    kind: str
    sigma: float
    knots: int = 20
    seed: int = 0
    realizations: int = 100

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown disorder kind {self.kind!r}")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be >= 0")
        if self.knots < 2:
            raise ConfigurationError("need at least 2 spline knots")
        if self.realizations < 1:
            raise ConfigurationError("need at least one realization")


class NoiseCurve:
    """Natural cubic spline through the knot offsets; zero curve for sigma=0."""

    def __init__(self, knot_times, knot_values):
        self.knot_times = np.asarray(knot_times, float)
        self.knot_values = np.asarray(knot_values, float)
        self._spline = CubicSpline(self.knot_times, self.knot_values, bc_type="natural")

    def __call__(self, t):
        return self._spline(t)


def realization_rng(seed: int, realization: int) -> np.random.Generator:
    """Counter-derived stream: same (seed, index) -> same stream, any order."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(realization,)))


def sample_noise(spec: DisorderSpec, T: float, rng: np.random.Generator,
                 names) -> dict[str, NoiseCurve]:
    """One NoiseCurve per name, in the given (deterministic) order."""
    tk = np.linspace(0.0, T, spec.knots)
    return {name: NoiseCurve(tk, rng.normal(0.0, spec.sigma, spec.knots))
            for name in names}


def _offsets_for(system: ScheduledHamiltonian, spec: DisorderSpec,
                 rng: np.random.Generator):
    """Evolve() offset kwargs for one realization on a scheduled system."""
    T = system.schedule.duration
    if spec.kind == "correlated_angle":
        names = sorted({b.param for b in system.bonds
                        if b.param is not None and b.trig is not None})
        curves = sample_noise(spec, T, rng, names)
        return {"angle_offsets": curves}
    if spec.kind == "hopping":
        names = [f"bond_{k}" for k in range(len(system.bonds))]
        curves = sample_noise(spec, T, rng, names)
        return {"bond_offsets": [curves[n] for n in names]}
    names = [f"site_{s}" for s in range(system.n_sites)]
    curves = sample_noise(spec, T, rng, names)
    return {"onsite_offsets": [curves[n] for n in names]}


def apply_disorder(lat: Lattice, curves, kind: str, t: float = 0.0) -> np.ndarray:
    """Perturbed Hamiltonian of a static lattice at time t.

    `curves` is the mapping produced by `sample_noise`: keyed by site index
    strings for onsite, bond index strings for hopping, and angle parameter
    names for correlated_angle.
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown disorder kind {kind!r}")
    n = lat.n_sites
    if kind == "onsite":
        H = lat.hamiltonian.copy()
        for s in range(n):
            cur = curves.get(f"site_{s}")
            if cur is None:
                raise ConfigurationError(f"missing onsite curve for site {s}")
            H[s, s] += float(cur(t))
        return H
    if kind == "hopping":
        H = lat.hamiltonian.copy()
        for k, b in enumerate(lat.bonds):
            cur = curves.get(f"bond_{k}")
            if cur is None:
                raise ConfigurationError(f"missing hopping curve for bond {k}")
            d = float(cur(t))
            H[b.i, b.j] += d
            H[b.j, b.i] += d
        return H
    # correlated_angle: rebuild every angle-referenced bond from theta + delta
    H = np.zeros((n, n))
    params = dict(lat.params)
    for name in params:
        cur = curves.get(name)
        if cur is not None:
            params[name] = params[name] + float(cur(t))
    for b in lat.bonds:
        if b.param is not None and b.trig is not None and b.param not in curves:
            raise ConfigurationError(f"missing angle curve for {b.param}")
        v = b.value(params)
        H[b.i, b.j] += v
        H[b.j, b.i] += v
    H[np.diag_indices(n)] += lat.onsite
    return H


@dataclass
class EnsembleProtocol:
    """What run_ensemble needs: a scheduled system plus initial/expected states."""

    system: ScheduledHamiltonian
    psi0: np.ndarray
    psi_expected: np.ndarray
    label: str = ""


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_fidelity: np.ndarray
    fidelity_stderr: np.ndarray
    entropy: np.ndarray
    n_total: int
    n_excluded: int
    kind: str
    sigma: float

    @property
    def n_effective(self) -> int:
        return self.n_total - self.n_excluded

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "kind", "sigma", "mean_fidelity", "fidelity_stderr",
                        "entropy", "n_effective"])
            for i, t in enumerate(self.times):
                w.writerow([f"{t:.17g}", self.kind, f"{self.sigma:.17g}",
                            f"{self.mean_fidelity[i]:.17g}",
                            f"{self.fidelity_stderr[i]:.17g}",
                            f"{self.entropy[i]:.17g}", self.n_effective])


def _one_realization(protocol: EnsembleProtocol, spec: DisorderSpec, r: int,
                     sample_every: int):
    rng = realization_rng(spec.seed, r)
    offsets = _offsets_for(protocol.system, spec, rng)
    try:
        traj: Trajectory = evolve(protocol.system, protocol.psi0,
                                  sample_every=sample_every, **offsets)
    except IntegratorError:
        return None
    return traj.states


def run_ensemble(protocol: EnsembleProtocol, spec: DisorderSpec,
                 sample_every: int | None = None, n_jobs: int = 1) -> EnsembleStats:
    """Mean fidelity vs the expected state and entropy of the averaged density
    matrix, per sample time, over `spec.realizations` seeded realizations.

    Realizations that fail the norm check are excluded and counted. Results
    are reduced in realization order, so they do not depend on `n_jobs`.
    """
    nsteps = protocol.system.schedule.n_steps
    if sample_every is None:
        sample_every = max(1, nsteps // 100)
    times = protocol.system.schedule.sample_times(sample_every)
    nt = len(times)
    n = protocol.system.n_sites
    f_sum = np.zeros(nt)
    f_sq = np.zeros(nt)
    rho = np.zeros((nt, n, n), complex)
    excluded = 0

    def reduce(states):
        nonlocal excluded
        if states is None:
            excluded += 1
            return
        F = np.abs(states @ protocol.psi_expected.conj()) ** 2
        f_sum[:] += F
        f_sq[:] += F * F
        for k in range(nt):
            rho[k] += np.outer(states[k], states[k].conj())

    N = spec.realizations
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            chunk = 4 * n_jobs
            for start in range(0, N, chunk):
                idx = range(start, min(start + chunk, N))
                for states in ex.map(
                        lambda r: _one_realization(protocol, spec, r, sample_every), idx):
                    reduce(states)
    else:
        for r in range(N):
            reduce(_one_realization(protocol, spec, r, sample_every))

    n_eff = max(1, N - excluded)
    mean = f_sum / n_eff
    var = np.clip(f_sq / n_eff - mean ** 2, 0.0, None)
    stderr = np.sqrt(var / n_eff)
    S = np.array([entropy_of_density(rho[k] / n_eff) for k in range(nt)])
    return EnsembleStats(times, mean, stderr, S, N, excluded, spec.kind, spec.sigma)
