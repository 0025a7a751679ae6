import numpy as np
import pytest

from oracles import fit_decay_rate, make_psd

from sensact import linalg
from sensact.covariance import (
    augmented_matrices,
    build_augmented,
    contraction_certificate,
    error_noise_term,
    mean_propagate,
    propagate_error_cov,
    steady_augmented_cov,
    steady_error_cov,
    steady_mean_phases,
)
from sensact.exceptions import DomainError, NilpotencyError, StabilityError
from sensact.plant import (
    GainSet,
    SystemModel,
    TargetSpec,
    mode_matrices,
    synthesize_gains,
)
from sensact.sequence import admissibility


def random_closed_loop(seed, n=3, m=1, p=1):
    """Random plant with synthesized stabilizing gains."""
    rng = np.random.default_rng(seed)
    model = SystemModel(
        a=rng.standard_normal((n, n)) * rng.uniform(0.3, 1.2),
        b=rng.standard_normal((n, m)),
        c=rng.standard_normal((p, n)),
        sigma_w=make_psd(rng, n, scale=rng.uniform(0.01, 1.0)),
        sigma_v=make_psd(rng, p, scale=rng.uniform(0.01, 1.0)),
    )
    gains = synthesize_gains(model, np.eye(n), np.eye(m))
    return model, gains, rng


def random_admissible_pairs(count, start_seed=0, max_len=6):
    """Deterministic stream of (model, gains, mm, bits) with an admissible
    word; skips draws that fail the admissibility check."""
    found = 0
    seed = start_seed
    while found < count:
        model, gains, rng = random_closed_loop(seed)
        mm = mode_matrices(model, gains)
        bits = tuple(int(b) for b in rng.integers(0, 2, int(rng.integers(2, max_len + 1))))
        seed += 1
        if len(set(bits)) < 2:
            continue
        try:
            if not admissibility(bits, mm).admissible:
                continue
        except NilpotencyError:
            continue
        found += 1
        yield model, gains, mm, bits


class TestErrorNoiseTerm:
    def test_actuation_step_drops_injection(self, cw_model, cw_gains):
        r = error_noise_term(1, cw_gains.l, cw_model.sigma_v, cw_model.sigma_w)
        np.testing.assert_allclose(r, cw_model.sigma_w)

    def test_zero_gain(self, cw_model):
        r = error_noise_term(0, np.zeros((6, 3)), cw_model.sigma_v, cw_model.sigma_w)
        np.testing.assert_allclose(r, cw_model.sigma_w)

    def test_scalar_arithmetic(self):
        r = error_noise_term(0, [[2.0]], [[0.01]], [[0.0001]])
        assert r[0, 0] == pytest.approx(0.0401)

    def test_rejects_bad_eta(self):
        with pytest.raises(DomainError):
            error_noise_term(2, [[1.0]], [[1.0]], [[1.0]])


class TestPropagation:
    def test_deadbeat_first_step(self, cw_model):
        # Atil = 0 when L is chosen to cancel A against C = I
        model = SystemModel(a=np.eye(2) * 0.5, b=np.eye(2), c=np.eye(2),
                            sigma_w=0.1 * np.eye(2), sigma_v=0.2 * np.eye(2))
        gains = GainSet(k=np.zeros((2, 2)), l=-model.a)
        mm = mode_matrices(model, gains)
        np.testing.assert_allclose(mm.omega_tilde0, np.zeros((2, 2)))
        p0 = make_psd(np.random.default_rng(0), 2)
        traj = propagate_error_cov(p0, (0,), mm, model.sigma_v, model.sigma_w, 1)
        r0 = error_noise_term(0, gains.l, model.sigma_v, model.sigma_w)
        np.testing.assert_allclose(traj[1], r0)

    def test_matches_unrolled_recursion(self, cw_model, cw_gains, cw_mm):
        bits = (0, 0, 1, 1)
        p0 = make_psd(np.random.default_rng(1), 6)
        traj = propagate_error_cov(p0, bits, cw_mm, cw_model.sigma_v, cw_model.sigma_w, 4)
        p = p0.copy()
        for eta in bits:
            a = cw_mm.atilde(eta)
            r = (cw_gains.l @ cw_model.sigma_v @ cw_gains.l.T) * (1 - eta) + cw_model.sigma_w
            p = a @ p @ a.T + r
        np.testing.assert_allclose(traj[4], p, rtol=1e-10, atol=1e-11)

    def test_steady_is_fixed_point(self, cw_model, cw_mm):
        steady = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        traj = propagate_error_cov(steady[0], "0011", cw_mm,
                                   cw_model.sigma_v, cw_model.sigma_w, 4)
        assert np.max(np.abs(traj[4] - steady[0])) < 1e-8

    def test_psd_preserved(self, cw_model, cw_mm):
        traj = propagate_error_cov(np.zeros((6, 6)), "0011", cw_mm,
                                   cw_model.sigma_v, cw_model.sigma_w, 40)
        for p in traj:
            assert np.min(np.linalg.eigvalsh(p)) >= -1e-9 * (1 + np.trace(p))


class TestSteadyErrorCov:
    def test_period_one_single_lyapunov(self, cw_model, cw_gains, cw_mm):
        steady = steady_error_cov("0", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        atil = cw_mm.omega_tilde0
        r0 = error_noise_term(0, cw_gains.l, cw_model.sigma_v, cw_model.sigma_w)
        expected = linalg.solve_discrete_lyapunov(atil, r0)
        np.testing.assert_allclose(steady[0], expected, atol=1e-10)

    def test_cyclic_recursion_residual(self, cw_model, cw_gains, cw_mm):
        bits = (0, 0, 1, 1)
        steady = steady_error_cov(bits, cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        for k in range(4):
            eta = bits[k]
            a = cw_mm.atilde(eta)
            r = error_noise_term(eta, cw_gains.l, cw_model.sigma_v, cw_model.sigma_w)
            succ = a @ steady[k] @ a.T + r
            assert np.max(np.abs(succ - steady[(k + 1) % 4])) < 1e-8

    def test_long_propagation_converges(self, cw_model, cw_mm):
        steady = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        traj = propagate_error_cov(np.zeros((6, 6)), "0011", cw_mm,
                                   cw_model.sigma_v, cw_model.sigma_w, 500)
        for k in range(496, 500):
            assert np.max(np.abs(traj[k] - steady[k % 4])) < 1e-6

    def test_observer_unstable_rejected(self, cw_model, cw_mm):
        # all-ones never senses; the observer side sits on the unit circle
        with pytest.raises(StabilityError):
            steady_error_cov("1", cw_mm, cw_model.sigma_v, cw_model.sigma_w)

    @pytest.mark.parametrize("idx", range(50))
    def test_random_pairs_fixed_point(self, idx):
        model, gains, mm, bits = next(random_admissible_pairs(1, start_seed=idx * 37))
        steady = steady_error_cov(bits, mm, model.sigma_v, model.sigma_w)
        n_p = len(bits)
        for k in range(n_p):
            eta = bits[k]
            a = mm.atilde(eta)
            r = error_noise_term(eta, gains.l, model.sigma_v, model.sigma_w)
            succ = a @ steady[k] @ a.T + r
            scale = 1.0 + np.max(np.abs(steady[(k + 1) % n_p]))
            assert np.max(np.abs(succ - steady[(k + 1) % n_p])) < 1e-8 * scale


class TestMeanPropagate:
    def test_all_zero(self, cw_mm):
        target = TargetSpec.origin(6, 3)
        xs, es = mean_propagate(cw_mm, np.zeros(6), np.zeros(6), "0011", target, 20)
        assert np.allclose(xs, 0.0) and np.allclose(es, 0.0)

    def test_decoupled_when_error_zero(self, cw_mm):
        rng = np.random.default_rng(3)
        mu0 = rng.standard_normal(6)
        target = TargetSpec.origin(6, 3)
        xs, _ = mean_propagate(cw_mm, mu0, np.zeros(6), "0011", target, 8)
        mu = mu0.copy()
        for k in range(8):
            mu = cw_mm.abar((0, 0, 1, 1)[k % 4]) @ mu
            np.testing.assert_allclose(xs[k + 1], mu, rtol=1e-12, atol=1e-12)

    def test_exponential_decay_rate(self, cw_mm):
        rng = np.random.default_rng(4)
        target = TargetSpec.origin(6, 3)
        periods = 20
        xs, es = mean_propagate(cw_mm, rng.standard_normal(6), rng.standard_normal(6),
                                "0011", target, 4 * periods)
        norms = np.linalg.norm(xs[:: 4], axis=1)
        rep = admissibility("0011", cw_mm)
        rate = fit_decay_rate(norms[2:])
        # per-period decay should approach qbar
        assert rate < 1.0
        assert rate == pytest.approx(rep.qbar, rel=0.2)
        assert np.linalg.norm(es[-1]) < 1e-12

    def test_equilibrium_held_under_actuation(self):
        model = SystemModel(a=[[0.5]], b=[[1.0]], c=[[1.0]],
                            sigma_w=[[0.0]], sigma_v=[[0.0]])
        gains = synthesize_gains(model, np.eye(1), np.eye(1))
        mm = mode_matrices(model, gains)
        target = TargetSpec([2.0], [1.0])
        xs, _ = mean_propagate(mm, np.array([2.0]), np.zeros(1), "1", target, 5)
        np.testing.assert_allclose(xs, 2.0 * np.ones((6, 1)), rtol=1e-12)

    def test_steady_mean_zero_for_origin(self, cw_mm):
        phases = steady_mean_phases(cw_mm, "0011", TargetSpec.origin(6, 3))
        np.testing.assert_allclose(phases, np.zeros((4, 6)), atol=1e-12)


class TestContraction:
    def test_deadbeat_certificate(self):
        model = SystemModel(a=np.eye(2) * 0.5, b=np.eye(2), c=np.eye(2),
                            sigma_w=0.1 * np.eye(2), sigma_v=0.2 * np.eye(2))
        gains = GainSet(k=np.zeros((2, 2)), l=-model.a)
        mm = mode_matrices(model, gains)
        cert = contraction_certificate("0", mm, model.sigma_v, model.sigma_w)
        r0 = error_noise_term(0, gains.l, model.sigma_v, model.sigma_w)
        assert cert.gamma == pytest.approx(np.linalg.norm(r0, 2))
        assert cert.limsup_bound == pytest.approx(cert.gamma)

    def test_steady_norms_below_limsup_bound(self, cw_model, cw_mm):
        cert = contraction_certificate("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        steady = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        # the bound covers the start-of-period phase it was built from
        assert np.linalg.norm(steady[0], 2) <= cert.limsup_bound + 1e-12

    def test_noise_scaling_linearity(self, cw_model, cw_mm):
        zero_v = np.zeros((3, 3))
        cert1 = contraction_certificate("0011", cw_mm, zero_v, cw_model.sigma_w)
        cert4 = contraction_certificate("0011", cw_mm, zero_v, 4.0 * cw_model.sigma_w)
        assert cert4.gamma == pytest.approx(4.0 * cert1.gamma, rel=1e-12)

    def test_requires_observer_stability(self, cw_model, cw_mm):
        with pytest.raises(StabilityError):
            contraction_certificate("1", cw_mm, cw_model.sigma_v, cw_model.sigma_w)

    @pytest.mark.parametrize("idx", range(20))
    def test_norm_sequence_inequality(self, idx):
        # rigorous variant: ||P_{N(n+1)}|| - g/(1-b) <= b (||P_Nn|| - g/(1-b))
        # with b the squared spectral norm of the monodromy
        model, gains, mm, bits = next(random_admissible_pairs(1, start_seed=900 + idx * 13))
        cert = contraction_certificate(bits, mm, model.sigma_v, model.sigma_w)
        beta = cert.monodromy_norm_sq
        rng = np.random.default_rng(idx)
        traj = propagate_error_cov(make_psd(rng, model.n, 5.0), bits, mm,
                                   model.sigma_v, model.sigma_w, 8 * len(bits))
        norms = [np.linalg.norm(traj[i * len(bits)], 2) for i in range(9)]
        for i in range(8):
            lhs = norms[i + 1]
            rhs = beta * norms[i] + cert.gamma
            assert lhs <= rhs * (1 + 1e-10) + 1e-12


class TestAugmented:
    def test_block_structure(self, cw_model, cw_gains):
        n, p = 6, 3
        for eta in (0, 1):
            a_b, gamma, g_u = augmented_matrices(cw_model, cw_gains, eta)
            bk = cw_model.b @ cw_gains.k
            np.testing.assert_allclose(a_b[:n, :n], cw_model.a + eta * bk)
            np.testing.assert_allclose(a_b[:n, n:], -eta * bk)
            np.testing.assert_allclose(a_b[n:, :n], np.zeros((n, n)))
            np.testing.assert_allclose(
                a_b[n:, n:], cw_model.a + (1 - eta) * cw_gains.l @ cw_model.c
            )
            np.testing.assert_allclose(gamma[:n, :p], np.zeros((n, p)))
            np.testing.assert_allclose(gamma[:n, p:], np.eye(n))
            np.testing.assert_allclose(gamma[n:, :p], (1 - eta) * cw_gains.l)
            np.testing.assert_allclose(gamma[n:, p:], np.eye(n))
            np.testing.assert_allclose(g_u[:n, :], eta * cw_model.b)
            np.testing.assert_allclose(g_u[n:, :], np.zeros((n, 3)))

    def test_spectrum_is_union_of_blocks(self, cw_model, cw_gains):
        for eta in (0, 1):
            a_b, _, _ = augmented_matrices(cw_model, cw_gains, eta)
            eигs = np.sort_complex(np.linalg.eigvals(a_b))
            blocks = np.concatenate([
                np.linalg.eigvals(a_b[:6, :6]), np.linalg.eigvals(a_b[6:, 6:])
            ])
            np.testing.assert_allclose(
                np.sort_complex(eигs), np.sort_complex(blocks), atol=1e-8
            )

    def test_noiseless_steady_is_zero(self, cw_model, cw_gains):
        quiet = SystemModel(a=cw_model.a, b=cw_model.b, c=cw_model.c,
                            sigma_w=np.zeros((6, 6)), sigma_v=np.zeros((3, 3)),
                            ts=cw_model.ts)
        joint, state = steady_augmented_cov("0011", quiet, cw_gains)
        for p in joint:
            assert np.max(np.abs(p)) < 1e-12

    def test_error_block_matches_error_solution(self, cw_model, cw_gains, cw_mm):
        joint, _ = steady_augmented_cov("0011", cw_model, cw_gains)
        err = steady_error_cov("0011", cw_mm, cw_model.sigma_v, cw_model.sigma_w)
        for k in range(4):
            np.testing.assert_allclose(joint[k][6:, 6:], err[k], atol=1e-8)

    def test_inadmissible_rejected(self, cw_model, cw_gains):
        with pytest.raises(StabilityError):
            steady_augmented_cov("1", cw_model, cw_gains)

    def test_monotone_in_process_noise(self, cw_model, cw_gains):
        _, state_lo = steady_augmented_cov("0011", cw_model, cw_gains)
        bumped = SystemModel(a=cw_model.a, b=cw_model.b, c=cw_model.c,
                             sigma_w=cw_model.sigma_w + 5e-5 * np.eye(6),
                             sigma_v=cw_model.sigma_v, ts=cw_model.ts)
        _, state_hi = steady_augmented_cov("0011", bumped, cw_gains)
        for k in range(4):
            diff = state_hi[k] - state_lo[k]
            assert np.min(np.linalg.eigvalsh(diff)) >= -1e-9 * (1 + np.trace(diff))

    def test_joint_fixed_point(self, cw_model, cw_gains):
        from sensact.covariance import build_augmented

        joint, _ = steady_augmented_cov("0011", cw_model, cw_gains)
        aug = build_augmented(cw_model, cw_gains)
        bits = (0, 0, 1, 1)
        for k in range(4):
            a = aug.a_modes[bits[k]]
            succ = a @ joint[k] @ a.T + aug.step_noise(bits[k])
            assert np.max(np.abs(succ - joint[(k + 1) % 4])) < 1e-8
