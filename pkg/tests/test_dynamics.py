import numpy as np
import pytest

from matryoshka import (ConfigurationError, PiecewiseLinear,
                        Schedule, ScheduledHamiltonian, bloch_evolve,
                        ensemble_entropy, evolve, fidelity, min_gap,
                        nonadiabatic_coupling)
from matryoshka.dynamics import (StepCurve, constant, observables_to_csv,
                                 trajectory_to_csv)
from matryoshka.lattice import BondSpec


def dimer_system(u, T, dt):
    sched = Schedule(T, dt, {"u": constant(u)})
    return ScheduledHamiltonian(2, [BondSpec(0, 1, "u", None, 1.0)], sched)


class TestEvolve:
    def test_static_dimer_rabi(self):
        u, T = 0.3, 21.0
        sys_ = dimer_system(u, T, T / 4000)
        psi0 = np.array([1.0, 0.0], complex)
        traj = evolve(sys_, psi0, sample_every=40)
        for t, psi in zip(traj.times, traj.states):
            assert abs(abs(psi[1]) ** 2 - np.sin(u * t) ** 2) < 1e-6

    def test_zero_hamiltonian_is_identity(self):
        sys_ = dimer_system(0.0, 5.0, 0.01)
        psi0 = np.array([0.6, 0.8j], complex)
        traj = evolve(sys_, psi0)
        assert np.abs(traj.final - psi0).max() < 1e-14

    def test_norm_conserved_over_1e4_steps(self):
        sched = Schedule(10.0, 1e-3, {"th": PiecewiseLinear([0, 10], [0.2, 1.4])})
        sys_ = ScheduledHamiltonian(
            4, [BondSpec(0, 1, "th", "sin"), BondSpec(1, 2, "th", "cos"),
                BondSpec(2, 3, "th", "sin")], sched)
        psi0 = np.zeros(4, complex)
        psi0[0] = 1.0
        traj = evolve(sys_, psi0, sample_every=10_000)
        assert traj.norm_drift < 1e-9

    def test_second_order_convergence(self):
        """Halving dt reduces the dimer-benchmark error by ~4x.

        A quadratic-in-time coupling makes the midpoint quadrature error
        visible (dimer Hamiltonians commute, so the exact propagator is the
        integral phase with mean coupling u*(1 + 1/3))."""
        u, T = 0.4, 8.0

        def err(nsteps):
            sched = Schedule(T, T / nsteps, {"u": lambda t: u * (1 + (t / T) ** 2)})
            sys_ = ScheduledHamiltonian(2, [BondSpec(0, 1, "u", None, 1.0)], sched)
            ueff = u * (1 + 1.0 / 3.0)
            ex = np.array([np.cos(ueff * T), -1j * np.sin(ueff * T)])
            traj = evolve(sys_, np.array([1.0, 0.0], complex), sample_every=nsteps)
            return np.abs(traj.final - ex).max()

        e1, e2 = err(200), err(400)
        assert 3.0 < e1 / e2 < 5.0

    def test_unnormalized_initial_state_rejected(self):
        sys_ = dimer_system(0.1, 1.0, 0.01)
        with pytest.raises(ConfigurationError):
            evolve(sys_, np.array([1.0, 1.0], complex))


class TestFidelityEntropy:
    def test_fidelity_examples(self):
        a = np.array([1, 0, 0], complex)
        b = np.array([0, 1, 0], complex)
        s = np.array([1, 1, 0], complex) / np.sqrt(2)
        assert fidelity(a, a) == pytest.approx(1.0)
        assert fidelity(a, b) == pytest.approx(0.0)
        assert fidelity(s, a) == pytest.approx(0.5)

    def test_fidelity_global_phase_invariant(self):
        a = np.array([0.6, 0.8j], complex)
        assert fidelity(a, np.exp(1j * 0.7) * a) == pytest.approx(1.0)

    def test_entropy_identical_pure_states(self):
        s = np.array([1, 0, 0], complex)
        assert ensemble_entropy([s] * 5) == pytest.approx(0.0, abs=1e-12)

    def test_entropy_maximal_mixture(self):
        states = [np.eye(7)[i].astype(complex) for i in range(7)]
        assert ensemble_entropy(states) == pytest.approx(np.log(7), abs=1e-12)

    def test_entropy_two_orthogonal(self):
        states = [np.array([1, 0], complex), np.array([0, 1], complex)]
        assert ensemble_entropy(states) == pytest.approx(np.log(2), abs=1e-12)


class TestNonadiabaticCoupling:
    def test_static_zero(self):
        sys_ = dimer_system(0.5, 10.0, 0.01)
        D = nonadiabatic_coupling(sys_, 3.0, 1e-4)
        assert np.abs(D).max() < 1e-10

    def test_antisymmetric_part_dominates(self):
        sched = Schedule(10.0, 0.01, {"th": PiecewiseLinear([0, 10], [0.3, 1.2])})
        sys_ = ScheduledHamiltonian(
            3, [BondSpec(0, 1, "th", "sin"), BondSpec(1, 2, "th", "cos")], sched)
        D = nonadiabatic_coupling(sys_, 5.0, 1e-6)
        assert np.linalg.norm(D + D.T) <= 1e-6 * np.linalg.norm(D) + 1e-12

    def test_degeneracy_warns(self):
        sched = Schedule(1.0, 0.01, {"th": constant(0.0)})
        sys_ = ScheduledHamiltonian(
            4, [BondSpec(0, 1, "th", "sin"), BondSpec(2, 3, "th", "sin")], sched)
        with pytest.warns(RuntimeWarning):
            nonadiabatic_coupling(sys_, 0.5, 1e-6)


class TestMinGap:
    def test_static_dimer_gap(self):
        sys_ = dimer_system(0.35, 4.0, 0.01)
        gaps = min_gap(sys_)
        assert gaps.shape == (1,)
        assert gaps[0] == pytest.approx(0.7, abs=1e-12)

    def test_sweep_endpoint_gaps_at_pi_8(self):
        """The reference values {0.786, 0.214, 0.176} are the initial-configuration
        separations at lambda = pi/8 (see the transfer tests for the sweep)."""
        lam = np.pi / 8
        y = np.sqrt(1 - np.sin(lam))
        x = np.sqrt(1 + np.sin(lam))
        assert abs(y - 0.786) < 5e-4
        assert abs(1 - y - 0.214) < 5e-4
        assert abs(x - 1 - 0.176) < 5e-4


class TestBloch:
    def test_constant_field_precession(self):
        times, rs = bloch_evolve(lambda t: np.array([0.0, 0.0, 1.0]),
                                 [1.0, 0.0, 0.0], 2 * np.pi, 1e-3)
        # dr/dt = n x r about z: (cos t, sin t, 0)
        expected = np.stack([np.cos(times), np.sin(times), 0 * times], axis=1)
        assert np.abs(rs - expected).max() < 1e-5

    def test_zero_field_constant(self):
        _, rs = bloch_evolve(lambda t: np.zeros(3), [0.0, 1.0, 0.0], 3.0, 0.01)
        assert np.abs(rs - rs[0]).max() == 0.0

    def test_norm_conserved(self):
        rng = np.random.default_rng(3)
        kn = rng.normal(0, 1, (4, 3))
        curve = lambda t: kn[min(int(t), 3)]
        _, rs = bloch_evolve(curve, [0.0, 0.0, 1.0], 4.0, 1e-3)
        assert np.abs(np.linalg.norm(rs, axis=1) - 1).max() < 1e-12

    def test_matches_two_level_schroedinger(self):
        """r(t) = <psi|sigma|psi> under H = 0.5 n(t).sigma, within 1e-6."""
        sx = np.array([[0, 1], [1, 0]], complex)
        sy = np.array([[0, -1j], [1j, 0]])
        sz = np.array([[1, 0], [0, -1]], complex)

        def n_of(t):
            return np.array([0.8 * np.sin(0.3 * t), 0.4, 1.0 - 0.1 * t])

        T, dt = 6.0, 5e-4
        psi = np.array([1.0, 0.0], complex)
        nsteps = int(round(T / dt))
        for k in range(nsteps):
            n = n_of((k + 0.5) * dt)
            H = 0.5 * (n[0] * sx + n[1] * sy + n[2] * sz)
            w, V = np.linalg.eigh(H)
            psi = V @ (np.exp(-1j * w * dt) * (V.conj().T @ psi))
        r_quantum = np.array([np.vdot(psi, sx @ psi).real,
                              np.vdot(psi, sy @ psi).real,
                              np.vdot(psi, sz @ psi).real])
        _, rs = bloch_evolve(n_of, [0.0, 0.0, 1.0], T, dt)
        assert np.abs(rs[-1] - r_quantum).max() < 1e-6

    def test_gap_law(self):
        for n in ([0.3, 0.4, 0.0], [1.0, 0.0, 0.0], [0.2, 0.5, 0.9]):
            sx = np.array([[0, 1], [1, 0]], complex)
            sy = np.array([[0, -1j], [1j, 0]])
            sz = np.array([[1, 0], [0, -1]], complex)
            H = 0.5 * (n[0] * sx + n[1] * sy + n[2] * sz)
            w = np.linalg.eigvalsh(H)
            assert abs((w[1] - w[0]) - np.linalg.norm(n)) < 1e-12


class TestCurvesAndCsv:
    def test_step_curve(self):
        c = StepCurve([0.0, 1.0, 2.0], [5.0, 7.0])
        assert c(0.5) == 5.0 and c(1.5) == 7.0 and c(2.5) == 7.0

    def test_csv_writers(self, tmp_path):
        sys_ = dimer_system(0.3, 2.0, 0.01)
        psi0 = np.array([1.0, 0.0], complex)
        traj = evolve(sys_, psi0, sample_every=50)
        p1 = tmp_path / "traj.csv"
        trajectory_to_csv(traj, p1)
        head = p1.read_text().splitlines()[0]
        assert head == "t,site_0_re,site_0_im,site_1_re,site_1_im"
        p2 = tmp_path / "obs.csv"
        observables_to_csv(traj, psi0, np.array([0, 1.0], complex), p2)
        assert p2.read_text().splitlines()[0] == "t,fidelity_initial,fidelity_expected,entropy"


class TestAdiabaticityDiagnostics:
    def test_sweep_adiabaticity_certificate(self):
        """Disorder-free sweep: max |D_ij| / gap_ij << 1 at T = 200."""
        from matryoshka.protocols import TransferProtocol, transfer_system

        system = transfer_system(TransferProtocol(duration=200.0, n_steps=4000))
        worst = 0.0
        for t in np.linspace(5.0, 195.0, 20):
            D = nonadiabatic_coupling(system, t, 1e-4)
            w = np.linalg.eigvalsh(system.hamiltonian_at(t))
            for i in range(len(w)):
                for j in range(len(w)):
                    if abs(w[i] - w[j]) > 1e-9:
                        worst = max(worst, abs(D[i, j]) / abs(w[i] - w[j]))
        assert worst < 0.1  # measured 0.053 at T=200: well inside adiabaticity

    def test_disorder_spikes_coupling_at_crossings(self):
        """On-site noise (sigma = 0.35) drives levels together; |D| spikes."""
        from matryoshka.disorder import DisorderSpec, _offsets_for, realization_rng
        from matryoshka.protocols import TransferProtocol, transfer_system

        p = TransferProtocol(duration=200.0, n_steps=2000)
        system = transfer_system(p)
        spec = DisorderSpec("onsite", 0.35, seed=31)
        clean_max, noisy_max = 0.0, 0.0
        ts = np.linspace(5.0, 195.0, 60)
        for t in ts:
            clean_max = max(clean_max, np.abs(
                nonadiabatic_coupling(system, t, 1e-4)).max())
        best = 0.0
        for r in range(4):
            offs = _offsets_for(system, spec, realization_rng(31, r))

            def eig(tt):
                return np.linalg.eigh(system.hamiltonian_at(tt, **offs))

            m = 0.0
            for t in ts:
                w0, V0 = eig(t)
                w1, V1 = eig(t + 1e-4)
                sgn = np.sign(np.diag(V0.T @ V1))
                sgn[sgn == 0] = 1.0
                D = V0.T @ (V1 * sgn - V0) / 1e-4
                m = max(m, np.abs(D).max())
            best = max(best, m)
        assert best > 10 * clean_max

    def test_min_gap_closes_under_strong_onsite_noise(self):
        """sigma = 0.5 on-site: most realizations show a near-closing gap."""
        from matryoshka.disorder import DisorderSpec, _offsets_for, realization_rng
        from matryoshka.protocols import TransferProtocol, transfer_system

        p = TransferProtocol(duration=200.0, n_steps=2000)
        system = transfer_system(p)
        spec = DisorderSpec("onsite", 0.5, seed=13)
        closes = 0
        n_real = 11
        for r in range(n_real):
            offs = _offsets_for(system, spec, realization_rng(13, r))
            gaps = min_gap(system, **offs)
            if gaps.min() < 1e-2:
                closes += 1
        assert closes > n_real // 2
