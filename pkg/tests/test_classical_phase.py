import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from spinlyap import kernels
from spinlyap.classical_phase import (
    PhasePoint,
    bloch_to_disk,
    classical_hamiltonian,
    classify_region,
    disk_to_bloch,
    effective_potential,
    find_fixed_points,
    fit_max_lyapunov_line,
    h2_boundary,
    hamiltonian_gradient,
    hamiltonian_qp,
    hyperbolic_point,
    jacobian_at,
    local_lyapunov,
    lyapunov_exponent,
    lyapunov_map,
    scan_fixed_points,
    solve_fixed_point_cubic,
)
from spinlyap.errors import DomainError, RegionError
from spinlyap.spin_core import ModelParams


def _energy_oracle(Q, P, p):
    """Mean-field energy per spin from the unit spin vector, via an independent disk-to-sphere map."""
    r2 = Q * Q + P * P
    cos_t = r2 / 2 - 1
    sin_t = math.sqrt(max(0.0, 1 - cos_t * cos_t))
    phi = math.atan2(-P, Q)
    sx = sin_t * math.cos(phi)
    return 2 * p.h * cos_t - 2 * p.J * sx**2 - 2 * p.K * sx**4


def _random_disk_points(rng, n):
    r = 2 * np.sqrt(rng.uniform(0, 1, n))
    a = rng.uniform(0, 2 * math.pi, n)
    return r * np.cos(a), r * np.sin(a)


def _fd_hessian(p, Q, P, step=1e-5):
    def H(q, pp):
        return float(hamiltonian_qp(q, pp, p))

    hqq = (H(Q + step, P) - 2 * H(Q, P) + H(Q - step, P)) / step**2
    hpp = (H(Q, P + step) - 2 * H(Q, P) + H(Q, P - step)) / step**2
    hqp = (H(Q + step, P + step) - H(Q + step, P - step) - H(Q - step, P + step) + H(Q - step, P - step)) / (4 * step**2)
    return hqq, hpp, hqp


class TestCoordinates:
    def test_round_trip(self, rng):
        Q, P = _random_disk_points(rng, 200)
        th, ph = disk_to_bloch(Q, P)
        Q2, P2 = bloch_to_disk(th, ph)
        np.testing.assert_allclose(Q2, Q, atol=1e-12)
        np.testing.assert_allclose(P2, P, atol=1e-12)

    def test_south_pole_is_origin(self):
        assert PhasePoint.from_bloch(math.pi, 0.0).Q == pytest.approx(0.0, abs=1e-7)

    def test_outside_disk(self):
        with pytest.raises(DomainError):
            PhasePoint(1.8, 1.0)
        with pytest.raises(DomainError):
            classical_hamiltonian((2.1, 0.0), ModelParams(h=1, J=1, K=0, N=10))


class TestHamiltonian:
    def test_origin(self, rng):
        for h in rng.uniform(-3, 3, 5):
            p = ModelParams(h=h, J=rng.uniform(0.1, 2), K=rng.uniform(0, 3), N=10)
            assert classical_hamiltonian(PhasePoint(0, 0), p) == -2 * h

    def test_lmg_truncation(self, rng):
        p = ModelParams(h=0.9, J=1.2, K=0.0, N=10)
        Q, P = _random_disk_points(rng, 100)
        expected = -2 * p.h + p.h * (Q**2 + P**2) - 2 * p.J * Q**2 + 0.5 * p.J * Q**2 * P**2 + 0.5 * p.J * Q**4
        np.testing.assert_allclose(hamiltonian_qp(Q, P, p), expected, atol=1e-14)

    def test_spin_vector_oracle(self, rng):
        p = ModelParams(h=2.7, J=0.8, K=1.9, N=10)
        Q, P = _random_disk_points(rng, 300)
        for q, pp in zip(Q, P):
            assert classical_hamiltonian((q, pp), p) == pytest.approx(_energy_oracle(q, pp, p), abs=1e-12)

    def test_potential_is_p0_slice(self, rng):
        p = ModelParams(h=3.0, J=1.0, K=1.5, N=10)
        Q = rng.uniform(-2, 2, 1000)
        np.testing.assert_allclose(effective_potential(Q, p), hamiltonian_qp(Q, 0.0, p), atol=1e-13)

    def test_potential_examples(self):
        p = ModelParams(h=1, J=1, K=0, N=10)
        Q = np.linspace(-2, 2, 41)
        np.testing.assert_allclose(effective_potential(Q, p), -2 - Q**2 + Q**4 / 2, atol=1e-14)
        assert effective_potential(0.0, ModelParams(h=2.5, J=1, K=3, N=10)) == -5.0

    def test_gradient_matches_finite_differences(self, rng):
        p = ModelParams(h=2.2, J=1.0, K=1.3, N=10)
        Q, P = _random_disk_points(rng, 50)
        Q, P = 0.95 * Q, 0.95 * P
        step = 1e-6
        gq, gp = hamiltonian_gradient(Q, P, p)
        fq = (hamiltonian_qp(Q + step, P, p) - hamiltonian_qp(Q - step, P, p)) / (2 * step)
        fp = (hamiltonian_qp(Q, P + step, p) - hamiltonian_qp(Q, P - step, p)) / (2 * step)
        np.testing.assert_allclose(gq, fq, atol=1e-7)
        np.testing.assert_allclose(gp, fp, atol=1e-7)


class TestFixedPoints:
    def test_lmg(self):
        fps = find_fixed_points(ModelParams(h=1, J=1, K=0, N=10))
        assert [round(fp.Q, 12) for fp in fps] == [-1.0, 0.0, 1.0]
        assert [fp.stability for fp in fps] == ["minimum", "hyperbolic", "minimum"]

    def test_region_two_five_points(self):
        p = ModelParams(h=3, J=1, K=1.5, N=10)
        fps = find_fixed_points(p)
        assert len(fps) == 5
        assert [fp.stability for fp in fps] == ["minimum", "hyperbolic", "minimum", "hyperbolic", "minimum"]
        scan = scan_fixed_points(p)
        np.testing.assert_allclose([fp.Q for fp in fps], scan, atol=1e-6)

    def test_region_three_single_point(self):
        p = ModelParams(h=5, J=1, K=0.5, N=10)
        assert h2_boundary(0.5) == pytest.approx(math.sqrt(64 / 13.5))
        fps = find_fixed_points(p)
        assert len(fps) == 1 and fps[0].Q == 0 and fps[0].stability == "minimum"
        np.testing.assert_allclose(scan_fixed_points(p), [0.0], atol=1e-6)

    def test_no_couplings(self):
        with pytest.raises(DomainError):
            find_fixed_points(ModelParams(h=1, J=0, K=0, N=10))

    def test_invariants_on_random_draws(self, rng):
        for _ in range(300):
            p = ModelParams(h=rng.uniform(0, 6), J=1.0, K=rng.uniform(0, 4), N=10)
            fps = find_fixed_points(p)
            Qs = np.array([fp.Q for fp in fps])
            assert len(fps) in (1, 3, 5)
            np.testing.assert_allclose(np.sort(-Qs), Qs, atol=1e-14)
            gq, gp = hamiltonian_gradient(Qs, 0.0, p)
            assert np.all(np.abs(gq) + np.abs(gp) < 1e-9)
            for fp in fps:
                assert math.cos(fp.bloch_theta) == pytest.approx(fp.Q**2 / 2 - 1, abs=1e-12)
                eig = np.linalg.eigvals(jacobian_at(fp, p))
                if fp.is_hyperbolic:
                    assert np.max(eig.real) > 0 and abs(np.max(eig.real) - lyapunov_exponent(fp, p)) < 1e-9
                else:
                    assert np.max(np.abs(eig.real)) < 1e-6

    def test_cubic_kinds(self):
        assert solve_fixed_point_cubic(ModelParams(h=3, J=1, K=1.5, N=10)).kind == "three-real"
        assert solve_fixed_point_cubic(ModelParams(h=5, J=1, K=0.5, N=10)).kind == "one-real"
        with pytest.raises(DomainError):
            solve_fixed_point_cubic(ModelParams(h=1, J=1, K=0, N=10))


class TestRegions:
    def test_threshold_meeting_point(self):
        assert abs(h2_boundary(0.25) - 2.0) < 1e-12

    def test_h2_value(self):
        assert h2_boundary(1.5) == pytest.approx(3.5556, abs=1e-4)

    def test_fig2_point(self):
        assert classify_region(ModelParams(h=3.265, J=1, K=1.5, N=10)).region == "II"

    def test_labels(self):
        assert classify_region(ModelParams(h=1.5, J=1, K=3, N=10)).region == "I"
        assert classify_region(ModelParams(h=3, J=1, K=0.2, N=10)).region == "III"
        assert classify_region(ModelParams(h=4, J=1, K=1.5, N=10)).region == "III"

    def test_boundaries_flagged(self):
        lab = classify_region(ModelParams(h=2.0, J=1, K=0, N=10))
        assert lab.region is None and lab.boundary == "h1" and lab.is_boundary
        k = 1.5
        lab = classify_region(ModelParams(h=h2_boundary(k), J=1, K=k, N=10))
        assert lab.boundary == "h2"
        assert abs(lab.discriminant) < 1e-9

    def test_kernel_region_codes_agree(self, rng):
        h = rng.uniform(0, 6, 40)
        K = rng.uniform(0, 4, 40)
        _, codes = kernels.lyapunov_grid(h, K, 1.0)
        names = {kernels.REGION_I: "I", kernels.REGION_II: "II", kernels.REGION_III: "III"}
        for i in range(40):
            for j in range(40):
                assert names[int(codes[i, j])] == classify_region(ModelParams(h=h[i], J=1, K=K[j], N=10)).region


def _benettin(p, Q, T=20.0, renorm=0.5):
    hqq, hpp, hqp = _fd_hessian(p, Q, 0.0)
    A = np.array([[hqp, hpp], [-hqq, -hqp]])
    v = np.array([1.0, 0.3])
    total = 0.0
    for _ in range(int(T / renorm)):
        sol = solve_ivp(lambda t, y: A @ y, (0, renorm), v, rtol=1e-11, atol=1e-13)
        w = sol.y[:, -1]
        n = np.linalg.norm(w)
        total += math.log(n)
        v = w / n
    return total / T


class TestLyapunov:
    def test_lmg_values(self):
        assert local_lyapunov(ModelParams(h=1, J=1, K=0, N=10)) == 2.0
        assert local_lyapunov(ModelParams(h=2, J=1, K=0, N=10)) == 0.0

    def test_lmg_formula(self):
        for h in np.linspace(0.05, 1.95, 20):
            assert local_lyapunov(ModelParams(h=h, J=1, K=0, N=10)) == pytest.approx(2 * math.sqrt(h * (2 - h)), rel=1e-13)

    def test_jacobian_lmg_origin(self):
        p = ModelParams(h=0.7, J=1.1, K=0, N=10)
        fp = hyperbolic_point(p)
        np.testing.assert_allclose(jacobian_at(fp, p), [[0, 1.4], [4.4 - 1.4, 0]], atol=1e-15)

    @pytest.mark.parametrize("hk", [(1.0, 0.0), (3.265, 1.5), (2.5, 3.0), (1.3, 2.0)])
    def test_uv_finite_differences(self, hk):
        p = ModelParams(h=hk[0], J=1, K=hk[1], N=10)
        for fp in find_fixed_points(p):
            hqq, hpp, _ = _fd_hessian(p, fp.Q, 0.0)
            assert fp.u == pytest.approx(hpp, abs=1e-4)
            assert fp.v == pytest.approx(-hqq, abs=1e-4)

    def test_minima_elliptic(self):
        p = ModelParams(h=3.265, J=1, K=1.5, N=10)
        for fp in find_fixed_points(p):
            if not fp.is_hyperbolic:
                assert fp.u * fp.v < 0
                assert lyapunov_exponent(fp, p) is None

    def test_benettin_oracle(self):
        p = ModelParams(h=3.265, J=1, K=1.5, N=10)
        fp = hyperbolic_point(p)
        lam = lyapunov_exponent(fp, p)
        assert lam > 2
        assert _benettin(p, fp.Q) == pytest.approx(lam, rel=2e-3)

    def test_region_one_vanishes_at_h1(self):
        for k in (0.0, 0.1, 0.2):
            lam = [local_lyapunov(ModelParams(h=2 - eps, J=1, K=k, N=10)) for eps in (1e-2, 1e-4, 1e-6)]
            assert lam[0] > lam[1] > lam[2] and lam[2] < 1e-2

    def test_region_three_raises(self):
        with pytest.raises(RegionError):
            hyperbolic_point(ModelParams(h=5, J=1, K=0.5, N=10))


class TestLyapunovMap:
    def test_small_map(self):
        lmap = lyapunov_map((0, 6), (0, 4), 61)
        assert lmap.lam.shape == (61, 61)
        assert np.all(lmap.lam >= 0)
        strip = lmap.h_over_J < 2
        spread = np.max(np.ptp(lmap.lam[strip], axis=1))
        assert spread < 1e-12
        assert np.all(lmap.lam[lmap.region == kernels.REGION_III] == 0)

    def test_workers_do_not_change_result(self):
        a = lyapunov_map((0, 6), (0, 4), 50, workers=1)
        b = lyapunov_map((0, 6), (0, 4), 50, workers=3)
        np.testing.assert_array_equal(a.lam, b.lam)
        np.testing.assert_array_equal(a.region, b.region)

    def test_cells_match_direct_calls(self, rng):
        lmap = lyapunov_map((0, 6), (0, 4), 80)
        for _ in range(20):
            i, j = rng.integers(0, 80, 2)
            p = ModelParams(h=lmap.h_over_J[i], J=1, K=lmap.K_over_J[j], N=10)
            assert lmap.lam[i, j] == pytest.approx(local_lyapunov(p), abs=1e-12)

    def test_fit_needs_region_two(self):
        with pytest.raises(RegionError):
            fit_max_lyapunov_line(lyapunov_map((0, 1.9), (0, 4), 50))

    def test_fit_is_converged_in_resolution(self):
        a = fit_max_lyapunov_line(lyapunov_map((2, 6), (0.3, 4), 200))
        b = fit_max_lyapunov_line(lyapunov_map((2, 6), (0.3, 4), 400))
        assert abs(a.slope - b.slope) < 0.01
        assert abs(a.intercept - b.intercept) < 0.02

    def test_ridge_is_per_K_maximum(self):
        lmap = lyapunov_map((2, 6), (0.3, 4), 150)
        line = fit_max_lyapunov_line(lmap)
        for h, k in zip(line.h_points[::10], line.K_points[::10]):
            here = local_lyapunov(ModelParams(h=h, J=1, K=k, N=10))
            for dh in (-0.05, 0.05):
                assert here >= local_lyapunov(ModelParams(h=h + dh, J=1, K=k, N=10))

    def test_ridge_asymptote_at_strong_coupling(self):
        # far from the window used for the figure, the ridge straightens out
        line = fit_max_lyapunov_line(lyapunov_map((27, 56), (20, 40), 400))
        assert line.slope == pytest.approx(0.7547, abs=0.01)
        assert line.intercept == pytest.approx(-0.8691, abs=0.02)


class TestEdgeCouplings:
    @pytest.mark.parametrize("K", [1e-300, 1e-200, 1e-14, 1e-12, 1e-9])
    def test_vanishing_quartic_matches_lmg(self, K):
        lmg = find_fixed_points(ModelParams(h=0.5, J=1, K=0, N=10))
        weak = find_fixed_points(ModelParams(h=0.5, J=1, K=K, N=10))
        np.testing.assert_allclose([fp.Q for fp in weak], [fp.Q for fp in lmg], atol=1e-8)
        lam, _ = kernels.lyapunov_grid(np.array([0.5]), np.array([K]), 1.0)
        assert lam[0, 0] == pytest.approx(local_lyapunov(ModelParams(h=0.5, J=1, K=K, N=10)), abs=1e-12)

    def test_zero_field_origin_is_degenerate(self):
        p = ModelParams(h=0.0, J=1, K=0.7, N=10)
        assert classify_region(p).region == "I"
        assert local_lyapunov(p) == 0.0
        with pytest.raises(RegionError):
            hyperbolic_point(p)
