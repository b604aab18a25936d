"""Hot numeric kernels: time-stepped unitary propagation and instantaneous spectra.

The propagator is the exponential midpoint rule: per step the Hamiltonian is
assembled from per-step bond/diagonal tables (already evaluated at the step
midpoints), diagonalized, and applied as ``V exp(-i w dt) V^T``. Each step is
exactly unitary, so the only norm drift is floating-point roundoff.

Every kernel has a numba version and a pure-numpy twin with identical
semantics; ``_backend`` decides which is bound to the public name.
"""

import numpy as np

from ._backend import NUMBA_AVAILABLE

if NUMBA_AVAILABLE:
    from numba import njit
else:  # decorator stub so both paths share one source for the numpy twins
    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco


def _propagate_py(bond_i, bond_j, bond_vals, diag_vals, psi0, dt, sample_stride):
    nsteps, nb = bond_vals.shape
    n = psi0.shape[0]
    nsamp = nsteps // sample_stride + 1
    out = np.empty((nsamp, n), np.complex128)
    psi = psi0.astype(np.complex128).copy()
    out[0] = psi
    m = 1
    H = np.zeros((n, n))
    for k in range(nsteps):
        H[:, :] = 0.0
        vals = bond_vals[k]
        H[bond_i, bond_j] = vals
        H[bond_j, bond_i] = vals
        # duplicate pairs would need accumulation; builders guarantee unique pairs
        H[np.diag_indices(n)] = diag_vals[k]
        w, V = np.linalg.eigh(H)
        psi = V @ (np.exp(-1j * w * dt) * (V.T @ psi))
        if (k + 1) % sample_stride == 0:
            out[m] = psi
            m += 1
    return out


@njit(cache=True, nogil=True)
def _propagate_nb(bond_i, bond_j, bond_vals, diag_vals, psi0, dt, sample_stride):  # pragma: no cover - parity-tested
    nsteps, nb = bond_vals.shape
    n = psi0.shape[0]
    nsamp = nsteps // sample_stride + 1
    out = np.empty((nsamp, n), np.complex128)
    psi_re = np.empty(n)
    psi_im = np.empty(n)
    for i in range(n):
        psi_re[i] = psi0[i].real
        psi_im[i] = psi0[i].imag
        out[0, i] = psi0[i]
    H = np.empty((n, n))
    a_re = np.empty(n)
    a_im = np.empty(n)
    m = 1
    for k in range(nsteps):
        for i in range(n):
            for j in range(n):
                H[i, j] = 0.0
        for b in range(nb):
            i = bond_i[b]
            j = bond_j[b]
            H[i, j] += bond_vals[k, b]
            H[j, i] += bond_vals[k, b]
        for i in range(n):
            H[i, i] += diag_vals[k, i]
        w, V = np.linalg.eigh(H)
        # amp = V^T psi (real orthogonal V, complex psi as two real vectors)
        for i in range(n):
            sr = 0.0
            si = 0.0
            for j in range(n):
                sr += V[j, i] * psi_re[j]
                si += V[j, i] * psi_im[j]
            a_re[i] = sr
            a_im[i] = si
        for i in range(n):
            c = np.cos(w[i] * dt)
            s = np.sin(w[i] * dt)
            # multiply by exp(-i w dt)
            r = a_re[i] * c + a_im[i] * s
            q = a_im[i] * c - a_re[i] * s
            a_re[i] = r
            a_im[i] = q
        for i in range(n):
            sr = 0.0
            si = 0.0
            for j in range(n):
                sr += V[i, j] * a_re[j]
                si += V[i, j] * a_im[j]
            psi_re[i] = sr
            psi_im[i] = si
        if (k + 1) % sample_stride == 0:
            for i in range(n):
                out[m, i] = complex(psi_re[i], psi_im[i])
            m += 1
    return out


def _spectra_py(bond_i, bond_j, bond_vals, diag_vals):
    nsteps, nb = bond_vals.shape
    n = diag_vals.shape[1]
    out = np.empty((nsteps, n))
    H = np.zeros((n, n))
    for k in range(nsteps):
        H[:, :] = 0.0
        vals = bond_vals[k]
        H[bond_i, bond_j] = vals
        H[bond_j, bond_i] = vals
        H[np.diag_indices(n)] = diag_vals[k]
        out[k] = np.linalg.eigvalsh(H)
    return out


@njit(cache=True, nogil=True)
def _spectra_nb(bond_i, bond_j, bond_vals, diag_vals):  # pragma: no cover - parity-tested
    nsteps, nb = bond_vals.shape
    n = diag_vals.shape[1]
    out = np.empty((nsteps, n))
    H = np.empty((n, n))
    for k in range(nsteps):
        for i in range(n):
            for j in range(n):
                H[i, j] = 0.0
        for b in range(nb):
            i = bond_i[b]
            j = bond_j[b]
            H[i, j] += bond_vals[k, b]
            H[j, i] += bond_vals[k, b]
        for i in range(n):
            H[i, i] += diag_vals[k, i]
        out[k] = np.linalg.eigvalsh(H)
    return out


if NUMBA_AVAILABLE:
    propagate_sampled = _propagate_nb
    instantaneous_spectra = _spectra_nb
else:
    propagate_sampled = _propagate_py
    instantaneous_spectra = _spectra_py
