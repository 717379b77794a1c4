"""Property-based checks of the structural invariants."""

import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from spinlyap.classical_phase import (
    bloch_to_disk,
    classify_region,
    disk_to_bloch,
    find_fixed_points,
    hamiltonian_gradient,
    hyperbolic_point,
    scan_fixed_points,
)
from spinlyap.io import Table, format_value, read_csv, write_table
from spinlyap.local_analytics import (
    LocalExpansion,
    analytic_antisqueezing,
    covariance_flow,
    ln_analytic_antisqueezing,
    local_expansion,
)
from spinlyap.quantum_dynamics import build_propagator, echo_protocol, evolve, husimi, hyperbolic_initial_state
from spinlyap.spin_core import (
    ModelParams,
    build_operators,
    coherent_state,
    spin_alpha_operator,
    variance,
)

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

couplings = st.tuples(st.floats(0.0, 6.0), st.floats(0.0, 4.0))
angles = st.tuples(st.floats(0.0, math.pi), st.floats(-math.pi, math.pi))


@FAST
@given(angles, st.integers(1, 60))
def test_coherent_mean_spin(ang, N):
    theta, phi = ang
    ops = build_operators(N)
    psi = coherent_state(theta, phi, N)
    mean = [np.vdot(psi, op @ psi).real for op in (ops.sx, ops.sy, ops.sz)]
    expected = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]) * N / 2
    np.testing.assert_allclose(mean, expected, atol=1e-10 * N)


@FAST
@given(angles, st.floats(0.0, math.pi), st.floats(0.0, math.pi), st.integers(1, 40))
def test_variance_pi_periodic(ang, alpha, theta_hyp, N):
    ops = build_operators(N)
    psi = coherent_state(ang[0], ang[1], N)
    a = variance(psi, spin_alpha_operator(alpha, theta_hyp, ops))
    b = variance(psi, spin_alpha_operator(alpha + math.pi, theta_hyp, ops))
    assert abs(a - b) < 1e-10 * max(1.0, N)


@FAST
@given(st.floats(0.0, 1.99), st.floats(-math.pi, math.pi))
def test_disk_round_trip(r, a):
    Q, P = r * math.cos(a), r * math.sin(a)
    th, ph = disk_to_bloch(Q, P)
    Q2, P2 = bloch_to_disk(th, ph)
    assert abs(Q2 - Q) < 1e-10 and abs(P2 - P) < 1e-10


@settings(max_examples=300, deadline=None)
@given(couplings)
def test_fixed_points_stationary_and_symmetric(hk):
    h, k = hk
    assume(h > 0 or k > 0)
    p = ModelParams(h=h, J=1.0, K=k, N=10)
    Qs = np.array([fp.Q for fp in find_fixed_points(p)])
    gq, gp = hamiltonian_gradient(Qs, 0.0, p)
    assert np.all(np.abs(gq) + np.abs(gp) < 1e-9)
    np.testing.assert_allclose(np.sort(-Qs), Qs, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(couplings)
def test_cardano_matches_scan(hk):
    p = ModelParams(h=hk[0], J=1.0, K=hk[1], N=10)
    lab = classify_region(p)
    assume(not lab.is_boundary and abs(hk[0] - 2.0) > 1e-6)
    Qs = [fp.Q for fp in find_fixed_points(p)]
    scan = scan_fixed_points(p)
    assert len(Qs) == len(scan)
    np.testing.assert_allclose(Qs, scan, atol=1e-6)


@settings(max_examples=300, deadline=None)
@given(couplings)
def test_hyperbolic_relations(hk):
    p = ModelParams(h=hk[0], J=1.0, K=hk[1], N=10)
    lab = classify_region(p)
    # at h = 0 the origin is degenerate (u = 0) and has no exponent
    assume(lab.region in ("I", "II") and hk[0] > 1e-6)
    fp = hyperbolic_point(p)
    assert abs(math.cos(fp.bloch_theta) - (fp.Q**2 / 2 - 1)) < 1e-12
    e = local_expansion(p, fp)
    assert abs(2 * e.nu - fp.u) <= 1e-10 * max(1.0, abs(fp.u))
    assert abs(-2 * e.mu - fp.v) <= 1e-10 * max(1.0, abs(fp.v))


expansions = st.tuples(st.floats(-5.0, -0.01), st.floats(0.01, 5.0))


@settings(max_examples=200, deadline=None)
@given(expansions, st.floats(0.0, 2.0))
def test_covariance_forms_agree(mn, t):
    e = LocalExpansion(0.0, 0.0, mn[0], mn[1], 0.0, 0.0)
    eig = covariance_flow(e, t).tau_c
    closed = analytic_antisqueezing(e, t)
    assert abs(eig - closed) <= 1e-12 * max(1.0, closed) * max(1.0, math.exp(2 * e.lam * t) / 1e3)
    assert abs(math.log(closed) - ln_analytic_antisqueezing(e, t)) < 1e-10


@settings(max_examples=200, deadline=None)
@given(expansions)
def test_antisqueezing_monotone_and_enhanced(mn):
    e = LocalExpansion(0.0, 0.0, mn[0], mn[1], 0.0, 0.0)
    t = np.linspace(0.0, 1.5, 61)
    xi = analytic_antisqueezing(e, t)
    assert np.all(xi >= 1.0 - 1e-15)
    assert np.all(np.diff(xi) >= 0)
    ln = ln_analytic_antisqueezing(e, t[1:])
    if e.kappa > e.lam * (1 + 1e-9):
        assert np.all(ln > 2 * e.lam * t[1:])
    elif abs(e.kappa - e.lam) < 1e-12:
        np.testing.assert_allclose(ln, 2 * e.lam * t[1:], atol=1e-10)


@FAST
@given(st.sampled_from([(1.0, 0.0), (3.265, 1.5), (1.5, 3.0), (0.5, 0.1)]), st.floats(0.0, 2.0),
       st.floats(0.0, math.pi), st.floats(-0.05, 0.05))
def test_echo_norm_and_identity(hk, t, alpha, dphi):
    p = ModelParams(h=hk[0], J=1.0, K=hk[1], N=60)
    init = hyperbolic_initial_state(p)
    prop = build_propagator(p)
    r = echo_protocol(init.state, prop, t, dphi, alpha, init.theta_hyp)
    assert abs(np.linalg.norm(r.state) - 1.0) < 1e-10
    assert 0.0 <= r.fidelity <= 1.0 + 1e-12
    assert abs(echo_protocol(init.state, prop, t, 0.0, alpha, init.theta_hyp).fidelity - 1.0) < 1e-10
    assert abs(np.linalg.norm(evolve(init.state, prop, t)) - 1.0) < 1e-10


@FAST
@given(st.integers(1, 80), angles, st.data())
def test_husimi_range(N, ang, data):
    psi = coherent_state(ang[0], ang[1], N)
    th = np.array(data.draw(st.lists(st.floats(0.0, math.pi), min_size=1, max_size=20)))
    ph = np.array(data.draw(st.lists(st.floats(-math.pi, math.pi), min_size=th.size, max_size=th.size)))
    raw = husimi(psi, th, ph, normalize=False)
    assert np.all(raw >= 0) and np.all(raw <= 1 + 1e-12)
    norm = husimi(psi, th, ph)
    assert np.all(norm >= 0) and np.all(norm <= 1)


@FAST
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_round_trip(x):
    assert float(format_value(x)) == x


@FAST
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=0, max_size=30))
def test_csv_round_trip(tmp_path_factory, values):
    d = tmp_path_factory.mktemp("csv")
    t = Table("t", {"x": values, "i": list(range(len(values)))}, {"x": "J", "i": "index"})
    units, cols = read_csv(write_table(t, d))
    assert units == {"x": "J", "i": "index"}
    assert [float(v) for v in cols["x"]] == values
    assert [int(v) for v in cols["i"]] == list(range(len(values)))
