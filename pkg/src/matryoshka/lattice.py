"""Sine-cosine chain construction, squaring, and the square-root angle lift.

A chain of order P is a 1D tight-binding lattice whose bonds alternate
``t sin(theta_1), t cos(theta_1), t sin(theta_2), ...`` with the angle list
repeating every ``2^P`` entries (one unit cell = ``2*2^P`` sites). Squaring
the chain's Hamiltonian in the chiral (sublattice) basis block-diagonalizes
it; the B block equals an order-(P-1) parent chain plus an identity shift,
which is what `lift_angles` inverts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConfigurationError, InfeasibleLiftError, StructureError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class BondSpec:
    """One bond of a lattice template.

    The bond value is ``scale * trig(params[param])`` when `param` is set
    (trig is "sin" or "cos"), otherwise the constant `const`. Keeping the
    parameter reference around is what lets schedules and correlated-angle
    disorder re-evaluate bonds consistently.
    """

    i: int
    j: int
    param: str | None = None
    trig: str | None = None
    scale: float = 1.0
    const: float = 0.0

    def value(self, params: dict[str, float]) -> float:
        if self.param is None:
            return self.const
        p = params[self.param]
        if self.trig is None:  # linear in the parameter (e.g. coupling ramps)
            return self.scale * p
        return self.scale * (np.sin(p) if self.trig == "sin" else np.cos(p))


@dataclass(frozen=True)
class ChainSpec:
    """Generative description of a sine-cosine chain.

    order: structure order P (the angle list must have exactly 2^P entries).
    angles: theta_j in radians.
    cells: number of unit cells N.
    scale: overall energy scale t^(P).
    boundary: "open" or "periodic".
    total_sites: optional override of the default 2*2^P*cells site count;
        open chains may end mid-cell to create terminal weak links.
    mirror: build the bond-palindromic variant (bond k uses pattern index
        min(k, n_sites-k)), so both chain ends start the pattern.
    """

    order: int
    angles: tuple[float, ...]
    cells: int
    scale: float = 1.0
    boundary: str = "open"
    total_sites: int | None = None
    mirror: bool = False

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.order < 0:
            raise ConfigurationError("order must be a non-negative integer")
        if len(self.angles) != 2 ** self.order:
            raise ConfigurationError(
                f"angle count {len(self.angles)} != 2^order = {2 ** self.order}"
            )
        if self.cells < 1:
            raise ConfigurationError("cells must be positive")
        if self.scale <= 0:
            raise ConfigurationError("scale must be positive")
        if self.boundary not in ("open", "periodic"):
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")
        if self.total_sites is not None:
            if self.boundary == "periodic":
                raise ConfigurationError("total_sites override requires open boundary")
            if not 2 <= self.total_sites <= 2 * len(self.angles) * self.cells:
                raise ConfigurationError("total_sites out of range for the cell count")

    @property
    def n_sites(self) -> int:
        return self.total_sites or 2 * len(self.angles) * self.cells


@dataclass
class Lattice:
    """Site graph plus dense real symmetric Hamiltonian.

    `sites` are human-readable labels in deterministic order (cell-major,
    A_j before B_j). `bonds`/`params`/`onsite` retain the parametric
    structure so that schedules and disorder can rebuild the matrix.
    """

    sites: list[str]
    hamiltonian: np.ndarray
    sublattice_mask: np.ndarray  # 'A'/'B' per site
    bonds: list[BondSpec] = field(default_factory=list)
    params: dict[str, float] = field(default_factory=dict)
    onsite: np.ndarray | None = None

    def __post_init__(self):
        H = self.hamiltonian
        if H.shape[0] != H.shape[1] or np.abs(H - H.T).max() > SYMMETRY_TOL:
            raise StructureError("hamiltonian is not symmetric to 1e-12")
        if self.onsite is None:
            self.onsite = np.zeros(H.shape[0])

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.shape[0]

    def chiral_operator(self) -> np.ndarray:
        """Gamma = diag(+1 on A, -1 on B)."""
        return np.diag(np.where(self.sublattice_mask == "A", 1.0, -1.0))

    def to_json_dict(self) -> dict:
        """Sparse export: labels, upper-triangle triplets, sublattice mask."""
        H = self.hamiltonian
        trip = []
        for i in range(H.shape[0]):
            for j in range(i + 1, H.shape[1]):
                if H[i, j] != 0.0:
                    trip.append([i, j, float(H[i, j])])
            if H[i, i] != 0.0:
                trip.append([i, i, float(H[i, i])])
        trip.sort()
        return {
            "sites": list(self.sites),
            "triplets": trip,
            "sublattice_mask": ["".join(x) for x in self.sublattice_mask],
        }

    def export_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _matrix_from_bonds(n, bonds, params, onsite=None):
    H = np.zeros((n, n))
    for b in bonds:
        v = b.value(params)
        H[b.i, b.j] += v
        H[b.j, b.i] += v
    if onsite is not None:
        H[np.diag_indices(n)] += onsite
    return H


def chain_bond_specs(spec: ChainSpec) -> tuple[list[BondSpec], dict[str, float]]:
    """Bond list + parameter map for a chain, without building the matrix."""
    na = len(spec.angles)
    params = {f"theta_{j + 1}": spec.angles[j] for j in range(na)}
    n = spec.n_sites
    bonds = []
    nb = n - 1
    for k in range(1, nb + 1):  # bond k joins sites k-1, k (1-based bond index)
        m = min(k, n - k) if spec.mirror else k
        pat = (m - 1) % (2 * na)
        j = pat // 2 + 1
        trig = "sin" if pat % 2 == 0 else "cos"
        bonds.append(BondSpec(k - 1, k, f"theta_{j}", trig, spec.scale))
    if spec.boundary == "periodic":
        bonds.append(BondSpec(n - 1, 0, f"theta_{na}", "cos", spec.scale))
    return bonds, params


def _chain_labels(spec: ChainSpec) -> tuple[list[str], np.ndarray]:
    na = len(spec.angles)
    labels, mask = [], []
    for s in range(spec.n_sites):
        cell, pos = divmod(s, 2 * na)
        sub = "A" if pos % 2 == 0 else "B"
        labels.append(f"{cell}:{sub}{pos // 2 + 1}")
        mask.append(sub)
    return labels, np.array(mask)


def build_chain(spec: ChainSpec) -> Lattice:
    """Construct the chain Hamiltonian for `spec`.

    Bonds alternate sin/cos of the repeating angle list; a periodic chain
    additionally wraps with ``t cos(theta_last)``.
    """
    bonds, params = chain_bond_specs(spec)
    labels, mask = _chain_labels(spec)
    H = _matrix_from_bonds(spec.n_sites, bonds, params)
    return Lattice(labels, H, mask, bonds, params)


def chiral_permutation(lat: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Site indices of the A and B sublattices, in site order."""
    mask = np.asarray(lat.sublattice_mask)
    return np.where(mask == "A")[0], np.where(mask == "B")[0]


def square_hamiltonian(lat: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Square H and return the (H_A, H_B) diagonal blocks in chiral order.

    Raises StructureError if the lattice is not bipartite (a nonzero A-A or
    B-B hopping), or if the cross blocks of the permuted square exceed 1e-12.
    """
    H = lat.hamiltonian
    a_idx, b_idx = chiral_permutation(lat)
    if np.abs(H[np.ix_(a_idx, a_idx)]).max(initial=0.0) > SYMMETRY_TOL or \
       np.abs(H[np.ix_(b_idx, b_idx)]).max(initial=0.0) > SYMMETRY_TOL:
        raise StructureError("lattice is not bipartite: found intra-sublattice hopping")
    H2 = H @ H
    cross = np.abs(H2[np.ix_(a_idx, b_idx)]).max(initial=0.0)
    if cross > SYMMETRY_TOL:
        raise StructureError(f"cross block of H^2 is {cross:.2e} > 1e-12")
    return H2[np.ix_(a_idx, a_idx)], H2[np.ix_(b_idx, b_idx)]


def lift_angles(parent_angles, parent_scale: float) -> tuple[np.ndarray, float]:
    """Solve the square-root conditions for child angles.

    Given a parent with angles ``theta^p_j`` embedded at scale ``t``, find
    ``2 * len(parent_angles)`` child angles in [0, pi/2] with

        t sin(theta^p_j) = cos(c_{2j-1}) sin(c_{2j})
        t cos(theta^p_j) = cos(c_{2j})   sin(c_{2j+1})   (cyclic wrap)

    so that the B block of the squared child chain reproduces the parent
    plus an identity shift. The child's own energy scale is 1 (the shift
    coefficient), returned as the second element.

    The system is solved sequentially from the first child angle; the wrap
    equation closes the cycle and is driven to zero with a bracketed root
    find over the first angle. Among multiple closing branches the smallest
    first angle is chosen, which keeps the output deterministic.
    """
    pa = np.asarray(parent_angles, float)
    t = float(parent_scale)
    if t <= 0:
        raise ConfigurationError("parent_scale must be positive")
    if np.any(pa < -1e-12) or np.any(pa > np.pi / 2 + 1e-12):
        raise ConfigurationError("parent angles must lie in [0, pi/2]")
    n = len(pa)
    rhs = np.empty(2 * n)
    rhs[0::2] = t * np.sin(pa)
    rhs[1::2] = t * np.cos(pa)
    if rhs.max() > 1.0:
        k = int(rhs.argmax())
        raise InfeasibleLiftError(
            f"t*{'sin' if k % 2 == 0 else 'cos'}(theta_p_{k // 2 + 1}) = "
            f"{rhs[k]:.6f} > 1: no real product of sines/cosines can match"
        )

    def forward(first):
        ch = np.empty(2 * n)
        ch[0] = first
        for k in range(2 * n - 1):
            c = np.cos(ch[k])
            if c <= 1e-15:
                return None
            s = rhs[k] / c
            if s > 1.0 + 1e-12 or s < 0.0:
                return None
            ch[k + 1] = np.arcsin(min(s, 1.0))
        return ch

    def closure(first):
        ch = forward(first)
        if ch is None:
            return np.nan
        return np.cos(ch[-1]) * np.sin(ch[0]) - rhs[-1]

    grid = np.linspace(0.0, np.pi / 2, 2049)
    vals = np.array([closure(g) for g in grid])
    ok = np.isfinite(vals)
    root = None
    for i in range(len(grid) - 1):
        if ok[i] and ok[i + 1] and vals[i] * vals[i + 1] <= 0:
            root = brentq(closure, grid[i], grid[i + 1], xtol=1e-15, rtol=8.9e-16)
            break
    if root is None and ok.any():
        # feasible window may only touch zero at its boundary (dimerized limits):
        # take the smallest-|closure| grid point, polished when possible
        fin = np.where(ok)[0]
        k = fin[np.argmin(np.abs(vals[fin]))]
        best_x, best_f = float(grid[k]), abs(vals[k])
        lo = grid[max(0, k - 1)]
        hi = grid[min(len(grid) - 1, k + 1)]
        res = minimize_scalar(lambda x: abs(closure(x)) if np.isfinite(closure(x)) else 1e9,
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-15})
        if np.isfinite(res.fun) and res.fun < best_f:
            best_x, best_f = float(res.x), float(res.fun)
        if best_f <= 1e-11:
            root = best_x
    if root is None:
        raise InfeasibleLiftError(
            "closure equation t*cos(theta_p_last) = cos(c_last)*sin(c_1) has no "
            f"root with all child angles in [0, pi/2] (scale t={t} too large)"
        )
    child = forward(root)
    resid = lift_residual(pa, t, child)
    if resid > 1e-10:
        raise InfeasibleLiftError(f"lift residual {resid:.2e} exceeds 1e-10")
    return child, 1.0


def lift_residual(parent_angles, parent_scale, child_angles) -> float:
    """Max violation of the two lift conditions (cyclic)."""
    pa = np.asarray(parent_angles, float)
    ch = np.asarray(child_angles, float)
    t = float(parent_scale)
    n = len(pa)
    r = 0.0
    for j in range(n):
        r = max(r, abs(np.cos(ch[2 * j]) * np.sin(ch[2 * j + 1]) - t * np.sin(pa[j])))
        r = max(r, abs(np.cos(ch[2 * j + 1]) * np.sin(ch[(2 * j + 2) % (2 * n)]) - t * np.cos(pa[j])))
    return r


@dataclass(frozen=True)
class LegSpec:
    """One Y-junction leg: sine-cosine segment hanging off the center.

    Sites run outer -> inner; bond k of the leg (1-based, the last one
    attaches to the center) takes sin(theta_{(k+1)//2}) for odd k and
    cos(theta_{k//2}) for even k, times `scale`.
    """

    angles: tuple[float, ...]
    n_sites: int = 3
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        need = (self.n_sites + 1) // 2
        if len(self.angles) < need:
            raise ConfigurationError(
                f"leg with {self.n_sites} sites needs >= {need} angles"
            )
        if self.n_sites < 1:
            raise ConfigurationError("legs need at least one site")


@dataclass(frozen=True)
class YJunctionSpec:
    """Three legs sharing one central site (the center is A-labeled)."""

    legs: tuple[LegSpec, LegSpec, LegSpec]

    def __post_init__(self):
        if len(self.legs) != 3:
            raise ConfigurationError("a Y junction has exactly three legs")


def y_junction_bond_specs(spec: YJunctionSpec):
    bonds, params = [], {}
    base = 1
    for L, leg in enumerate(spec.legs):
        for j, a in enumerate(leg.angles):
            params[f"leg{L}_theta{j + 1}"] = a
        n = leg.n_sites
        for k in range(1, n + 1):  # bond k joins leg sites k-1,k; bond n hits center
            j = (k + 1) // 2
            trig = "sin" if k % 2 == 1 else "cos"
            i_site = base + k - 1
            j_site = base + k if k < n else 0
            bonds.append(BondSpec(i_site, j_site, f"leg{L}_theta{j}", trig, leg.scale))
        base += n
    return bonds, params


def build_y_junction(spec: YJunctionSpec) -> Lattice:
    """Y junction: central A site (index 0), legs appended outer->inner.

    Removing the central site disconnects the three legs by construction.
    """
    bonds, params = y_junction_bond_specs(spec)
    n = 1 + sum(leg.n_sites for leg in spec.legs)
    labels = ["C"]
    mask = ["A"]
    for L, leg in enumerate(spec.legs):
        for k in range(leg.n_sites):
            labels.append(f"L{L}:{k}")
            # alternate outward from the A center: innermost leg site is B
            depth_from_center = leg.n_sites - k  # 1 = innermost
            mask.append("B" if depth_from_center % 2 == 1 else "A")
    H = _matrix_from_bonds(n, bonds, params)
    lat = Lattice(labels, H, np.array(mask), bonds, params)
    _check_y_mask(lat)
    return lat


def _check_y_mask(lat: Lattice) -> None:
    H = lat.hamiltonian
    mask = lat.sublattice_mask
    nz = np.argwhere(np.abs(H) > 0)
    for i, j in nz:
        if mask[i] == mask[j]:
            raise StructureError(
                f"leg/sublattice mismatch: bond {lat.sites[i]}-{lat.sites[j]} "
                "connects same-sublattice sites"
            )


@dataclass(frozen=True)
class QubitSpec:
    """A two-site qubit attached to the memory chain.

    internal_hopping: the qubit's own bond k (its levels sit at +-k).
    coupling: u; the attached site is coupled with u * weight_i.
    target_energy: edge-state energy this qubit addresses (bookkeeping for
        protocols; the lattice itself only needs the couplings).
    attachments: (chain site index, weight); weights are normalized so the
        summed squared coupling equals u^2.
    """

    internal_hopping: float
    coupling: float
    attachments: tuple[tuple[int, float], ...]
    target_energy: float = 0.0

    def normalized_weights(self) -> np.ndarray:
        w = np.array([a[1] for a in self.attachments], float)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            raise ConfigurationError("attachment weights are all zero")
        return w / nrm


@dataclass(frozen=True)
class MemorySpec:
    chain: ChainSpec
    qubits: tuple[QubitSpec, ...]

    def __post_init__(self):
        if not self.qubits:
            raise ConfigurationError("memory system needs at least one qubit")


def build_memory_system(spec: MemorySpec) -> Lattice:
    """Chain plus appended qubit pairs.

    Each qubit adds two sites (coupled site first); the coupling row carries
    u-scaled normalized attachment weights. With u = 0 the qubit block is
    exactly decoupled.
    """
    chain = build_chain(spec.chain)
    n_chain = chain.n_sites
    n = n_chain + 2 * len(spec.qubits)
    H = np.zeros((n, n))
    H[:n_chain, :n_chain] = chain.hamiltonian
    labels = list(chain.sites)
    mask = list(chain.sublattice_mask)
    bonds = list(chain.bonds)
    params = dict(chain.params)
    for q, qb in enumerate(spec.qubits):
        for site, _ in qb.attachments:
            if not 0 <= site < n_chain:
                raise ConfigurationError(
                    f"qubit {q} attaches to site {site}, outside the chain"
                )
        i0 = n_chain + 2 * q
        i1 = i0 + 1
        labels += [f"Q{q}:0", f"Q{q}:1"]
        # the coupled qubit site pairs with the sublattice of its attachments
        att_subs = {mask[s] for s, _ in qb.attachments}
        sub0 = "B" if att_subs == {"A"} else "A"
        mask += [sub0, "A" if sub0 == "B" else "B"]
        H[i0, i1] = H[i1, i0] = qb.internal_hopping
        bonds.append(BondSpec(i0, i1, const=qb.internal_hopping))
        params[f"u_{q}"] = qb.coupling
        w = qb.normalized_weights()
        for (site, _), wi in zip(qb.attachments, w):
            H[i0, site] += qb.coupling * wi
            H[site, i0] += qb.coupling * wi
            bonds.append(BondSpec(i0, site, param=f"u_{q}", trig=None, scale=wi))
    return Lattice(labels, H, np.array(mask), bonds, params)
