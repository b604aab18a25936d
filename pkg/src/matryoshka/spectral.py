"""Eigen-decomposition, Bloch bands, nested-radical edge energies, edge detection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StructureError
from .lattice import ChainSpec, Lattice

DEGENERACY_TOL = 1e-8  # pairs closer than this get the left/right gauge rotation
BULK_MATCH_TOL = 1e-6  # energy coincidence window for the bulk-majority rule


@dataclass
class Spectrum:
    """Full spectrum of a lattice, ascending, with a deterministic gauge."""

    energies: np.ndarray
    states: np.ndarray  # column i <-> energies[i]

    def __len__(self):
        return len(self.energies)


@dataclass
class EdgeStateReport:
    indices: list[int] = field(default_factory=list)
    sides: list[str] = field(default_factory=list)        # left / right / hybridized
    localization_lengths: list[float] = field(default_factory=list)  # sites
    gap_ids: list[int] = field(default_factory=list)
    tail_sites: int = 0

    def __len__(self):
        return len(self.indices)


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Largest-magnitude component of every column made positive."""
    idx = np.abs(V).argmax(axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _degenerate_clusters(E: np.ndarray, tol: float):
    out, start = [], 0
    for i in range(1, len(E) + 1):
        if i == len(E) or E[i] - E[i - 1] > tol:
            out.append(slice(start, i))
            start = i
    return out


def _localize_cluster(block: np.ndarray, n_sites: int, n_tail: int) -> np.ndarray:
    """Rotate a degenerate block so members are maximally left/right localized.

    Diagonalizes the left-tail weight operator restricted to the span, then
    the right-tail operator within the complement of the left-captured
    columns. Deterministic and orthogonal, so exact degeneracy keeps the
    columns eigenvectors.
    """
    G = block[:n_tail, :].T @ block[:n_tail, :]
    wl, R = np.linalg.eigh(G)
    block = block @ R[:, ::-1]          # descending left-tail weight
    k = int(np.sum(wl[::-1] > 0.5))     # columns now considered left-localized
    rest = block[:, k:]
    if rest.shape[1] >= 2:
        G = rest[n_sites - n_tail:, :].T @ rest[n_sites - n_tail:, :]
        _, R = np.linalg.eigh(G)
        block[:, k:] = rest @ R[:, ::-1]
    return block


def diagonalize(lat: Lattice, localize_degenerate: bool = True,
                tail_fraction: float = 0.15) -> Spectrum:
    """Dense symmetric eigendecomposition with reproducible eigenvectors.

    Gauge: within near-degenerate clusters (spacing < 1e-8) eigenvectors are
    rotated against the left/right tail projectors so "left" and "right"
    edge states come out the same way every run; every column's largest
    component is then made positive.
    """
    H = lat.hamiltonian
    if np.abs(H - H.T).max() > 1e-12:
        raise StructureError("diagonalize needs a symmetric matrix")
    E, V = np.linalg.eigh(H)
    n = lat.n_sites
    if localize_degenerate:
        n_tail = max(1, int(round(tail_fraction * n)))
        for cl in _degenerate_clusters(E, DEGENERACY_TOL):
            if cl.stop - cl.start >= 2:
                V[:, cl] = _localize_cluster(V[:, cl], n, n_tail)
    V = _fix_signs(V)
    return Spectrum(E, V)


def bloch_matrix(spec: ChainSpec, k: float) -> np.ndarray:
    """Cell Hamiltonian h(k) of the periodic chain (2*2^P dimensional)."""
    na = len(spec.angles)
    n = 2 * na
    s = spec.scale * np.sin(spec.angles)
    c = spec.scale * np.cos(spec.angles)
    h = np.zeros((n, n), complex)
    for j in range(na):
        h[2 * j, 2 * j + 1] += s[j]
        if j < na - 1:
            h[2 * j + 1, 2 * j + 2] += c[j]
    h[n - 1, 0] += c[na - 1] * np.exp(1j * k)
    return h + h.conj().T


def bloch_bands(spec: ChainSpec, k_grid) -> list[tuple[float, np.ndarray]]:
    """Band energies at each k: the 2^(P+1) eigenvalues of h(k), ascending."""
    if spec.boundary != "periodic":
        raise ConfigurationError("bloch_bands needs a periodic ChainSpec")
    return [(float(k), np.linalg.eigvalsh(bloch_matrix(spec, float(k)))) for k in k_grid]


def dispersion_closed_form(k: float, base_angle: float, embed_scales) -> np.ndarray:
    """Nested closed form: E^(0) = +-sqrt(1 + sin(2 theta) cos k), then
    E^(P) = +-sqrt(1 + t^(P-1) E^(P-1)) over all sign choices. Sorted."""
    E = np.array([1.0, -1.0]) * np.sqrt(1.0 + np.sin(2 * base_angle) * np.cos(k))
    for t in embed_scales:
        rad = 1.0 + t * E
        if np.any(rad < 0):
            raise ConfigurationError("closed form undefined: negative radicand")
        r = np.sqrt(rad)
        E = np.concatenate([r, -r])
    return np.sort(E)


def edge_energies(scales) -> np.ndarray:
    """Nested-radical mid-gap energies.

    Starting from the +-1 pair (the image of a parent zero mode), each scale
    s in `scales` (outermost last) maps the set E to {+-1} U {+-sqrt(1+s*e)}.
    Duplicates are kept. Length is 2^(len(scales)+2) - 2.
    """
    E = [1.0, -1.0]
    for s in scales:
        if s <= 0:
            raise ConfigurationError("edge-energy scales must be positive")
        nxt = [1.0, -1.0]
        for e in E:
            rad = 1.0 + s * e
            if rad < 0:
                raise ConfigurationError(
                    f"radical argument 1 + {s}*({e:.6f}) < 0: domain error"
                )
            nxt += [np.sqrt(rad), -np.sqrt(rad)]
        E = nxt
    return np.sort(E)


def _localization_length(psi: np.ndarray, from_left: bool) -> float:
    """Exponential decay length (sites) of |psi|^2 away from its edge.

    Fitted on the near half only, so hybridized (two-ended) states still get
    the decay of their local tail rather than a flat V-shape average.
    """
    p = np.abs(psi) ** 2
    if not from_left:
        p = p[::-1]
    p = p[: max(2, len(p) // 2)]
    good = p > 1e-24
    if good.sum() < 2:
        return 0.0
    x = np.where(good)[0]
    y = np.log(p[good])
    slope = np.polyfit(x, y, 1)[0]
    return float("inf") if slope >= 0 else -2.0 / slope


def detect_edge_states(spec: Spectrum, lat: Lattice, tail_fraction: float = 0.15,
                       weight_threshold: float = 0.5) -> EdgeStateReport:
    """Flag boundary-localized mid-gap states of an open chain.

    A state qualifies when its probability weight inside the outer
    `tail_fraction` of sites (per side) reaches `weight_threshold`, unless
    its energy coincides (within 1e-6) with at least as many non-localized
    states: such levels belong to a bulk band that merely touches the
    boundary region, not to a protected gap.

    Periodic lattices report no edge states.
    """
    n = lat.n_sites
    report = EdgeStateReport()
    if n > 2 and any(abs(b.i - b.j) == n - 1 for b in lat.bonds):
        return report  # ring: no boundary
    n_tail = max(1, int(round(tail_fraction * n)))
    report.tail_sites = n_tail
    E, V = spec.energies, spec.states
    lw = (np.abs(V[:n_tail, :]) ** 2).sum(axis=0)
    rw = (np.abs(V[n - n_tail:, :]) ** 2).sum(axis=0)
    localized = (lw + rw) >= weight_threshold

    candidates = np.where(localized)[0]
    kept = []
    for i in candidates:
        close = np.abs(E - E[i]) < BULK_MATCH_TOL
        n_bulk = int(np.sum(close & ~localized))
        n_loc = int(np.sum(close & localized))
        if n_bulk >= n_loc:
            continue
        kept.append(int(i))

    gaps = _gap_ids(E, localized, kept)
    for i in kept:
        if lw[i] >= weight_threshold:
            side = "left"
        elif rw[i] >= weight_threshold:
            side = "right"
        else:
            side = "hybridized"
        report.indices.append(i)
        report.sides.append(side)
        report.localization_lengths.append(
            _localization_length(V[:, i], from_left=lw[i] >= rw[i])
        )
        report.gap_ids.append(gaps[i])
    return report


def _gap_ids(E: np.ndarray, localized: np.ndarray, kept) -> dict[int, int]:
    """Gap index = number of bulk band clusters fully below the state."""
    bulk = np.sort(E[~localized])
    out = {}
    if len(bulk) == 0:
        return {i: 0 for i in kept}
    d = np.diff(bulk)
    typical = np.median(d) if len(d) else 0.0
    # band boundaries where the bulk spectrum jumps well beyond its typical spacing
    splits = bulk[:-1][d > max(10 * typical, 1e-6)] if len(d) else np.array([])
    for i in kept:
        out[i] = int(np.searchsorted(splits, E[i]))
    return out


def spectrum_to_csv(spec: Spectrum, lat: Lattice, path, tail_fraction: float = 0.15,
                    report: EdgeStateReport | None = None) -> None:
    """`index,energy,left_weight,right_weight,is_edge` rows."""
    n = lat.n_sites
    n_tail = max(1, int(round(tail_fraction * n)))
    V = spec.states
    lw = (np.abs(V[:n_tail, :]) ** 2).sum(axis=0)
    rw = (np.abs(V[n - n_tail:, :]) ** 2).sum(axis=0)
    if report is None:
        report = detect_edge_states(spec, lat, tail_fraction)
    edge = set(report.indices)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "energy", "left_weight", "right_weight", "is_edge"])
        for i in range(len(spec.energies)):
            w.writerow([i, f"{spec.energies[i]:.17g}", f"{lw[i]:.17g}",
                        f"{rw[i]:.17g}", int(i in edge)])


def bands_to_csv(bands, path) -> None:
    """`k,band_0,...` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        nb = len(bands[0][1])
        w.writerow(["k"] + [f"band_{i}" for i in range(nb)])
        for k, E in bands:
            w.writerow([f"{k:.17g}"] + [f"{e:.17g}" for e in np.sort(E)])
