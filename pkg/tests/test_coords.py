import math

import numpy as np
import pytest

from fermijet import jets as J
from fermijet.coords import (
    FermiChart,
    GeodesicError,
    GeodesicSolverConfig,
    fermi_map,
    geodesic_flow,
    intrinsic_exp,
    normal_transport,
)
from fermijet.geometry import MetricChart, SubmanifoldChart, adapted_frame, reference_form
from fermijet.jets import Jet

from conftest import ALL_CASES, built, chart


def flat(n):
    return MetricChart(n, (n, 0), lambda z: np.eye(n).tolist(), "flat")


def round_sphere():
    return MetricChart(2, (2, 0), lambda z: [[1.0, 0.0], [0.0, J.sin(z[0]) ** 2]], "S2")


def sphere_offset(chart_, x, u):
    """Closed form of the chart on the unit sphere: radial rays over the intrinsic exponential."""
    p, E, nu = chart_.frame.point, chart_.frame.e_tan, chart_.frame.e_nor[:, 0]
    r = float(np.linalg.norm(x))
    w = E @ x
    q = p * math.cos(r) + (w * math.sin(r) / r if r else 0.0)
    return (1.0 + u * float(nu @ p)) * q


def circle_offset(x, u):
    return (1.0 + u) * np.array([math.cos(x), math.sin(x)])


# -- solver config ----------------------------------------------------------------

def test_solver_config_validation():
    with pytest.raises(ValueError):
        GeodesicSolverConfig(steps_per_unit=4)
    with pytest.raises(ValueError):
        GeodesicSolverConfig(method="euler")
    with pytest.raises(ValueError):
        GeodesicSolverConfig(atol=0.0)
    with pytest.raises(GeodesicError):
        GeodesicSolverConfig(max_steps=100).steps_for(10.0)


# -- geodesic flow -----------------------------------------------------------------

def test_flat_geodesic_is_straight():
    w = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(geodesic_flow(flat(3), np.zeros(3), w), w, atol=1e-15)
    z0 = Jet.constant(np.zeros(3), 2, 3)
    v0 = J.stack([Jet.variable(0, 0.5, 2, 3), Jet.constant(0.0, 2, 3), Jet.variable(1, 0.0, 2, 3)])
    z = geodesic_flow(flat(3), z0, v0)
    np.testing.assert_allclose(z.coeffs, v0.coeffs, atol=1e-14)


def test_sphere_geodesic_along_equator():
    z = geodesic_flow(round_sphere(), [math.pi / 2, 0.2], [0.0, 1.0])
    np.testing.assert_allclose(z, [math.pi / 2, 1.2], atol=1e-12)
    z = geodesic_flow(round_sphere(), [math.pi / 2, 0.0], [0.6, 0.8])
    # great circle through the equator at angle: compare unit vectors
    th, ph = z
    got = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
    t0 = np.array([0.0, 0.8, -0.6])        # d/dtheta points to -z
    want = math.cos(1.0) * np.array([1.0, 0.0, 0.0]) + math.sin(1.0) * t0
    np.testing.assert_allclose(got, want, atol=1e-8)


# -- intrinsic exponential and normal transport ---------------------------------

def test_intrinsic_exp_examples():
    _, g, sub, fr = built("flat-affine", type=((2, 0), (1, 0)))
    x = np.array([0.2, -0.1])
    np.testing.assert_allclose(intrinsic_exp(g, sub, fr, x), x, atol=1e-15)
    _, g, sub, fr = built("circle-in-plane")
    assert intrinsic_exp(g, sub, fr, [0.37])[0] == pytest.approx(0.37, abs=1e-14)
    xj = Jet.seed([0.0], 4)
    s = intrinsic_exp(g, sub, fr, xj)
    np.testing.assert_allclose(s.coeffs, xj.coeffs, atol=1e-14)


def test_normal_transport_examples():
    _, g, sub, fr = built("flat-affine", type=((2, 0), (1, 0)))
    np.testing.assert_allclose(normal_transport(g, sub, fr, [0.3, 0.2]), fr.e_nor, atol=1e-15)
    _, g, sub, fr = built("circle-in-plane")
    for t in (0.1, 0.4, -0.45):
        nu = normal_transport(g, sub, fr, [t])[:, 0]
        np.testing.assert_allclose(nu, [math.cos(t), math.sin(t)], atol=1e-9)


@pytest.mark.parametrize("name", sorted(ALL_CASES))
def test_transported_frame_gram(name):
    case = ALL_CASES[name]
    g, sub = case.build()
    fr = adapted_frame(g, sub, case.h)
    x = 0.3 * np.linspace(1.0, -0.5, case.k) / max(1.0, math.sqrt(case.k))
    nu, s = normal_transport(g, sub, fr, x, return_path=True)
    gm = g.at(sub.point(s))
    X = sub.jacobian(s)
    hn = case.h[case.k:, case.k:]
    assert np.max(np.abs(nu.T @ gm @ nu - hn)) <= 1e-8
    assert np.max(np.abs(X.T @ gm @ nu)) <= 1e-8


# -- the chart map ----------------------------------------------------------------

def test_flat_affine_chart_is_identity():
    c = chart("flat-affine", type=((2, 0), (1, 0)))
    np.testing.assert_allclose(c([0.1, -0.2], [0.3]), [0.1, -0.2, 0.3], atol=1e-15)
    Phi = c.map_jet(4)
    np.testing.assert_allclose(Phi.const, 0.0, atol=1e-15)
    np.testing.assert_allclose(Phi.gradient().const, np.eye(3), atol=1e-15)
    assert Phi.with_order(4).coeffs[:, 4:].max() == 0.0 and np.abs(Phi.coeffs[:, 4:]).max() < 1e-15


def test_circle_chart_matches_offset_closed_form():
    c = chart("circle-in-plane")
    for x, u in [(0.2, 0.1), (-0.3, -0.2), (0.1, 0.35)]:
        np.testing.assert_allclose(c([x], [u]), circle_offset(x, u), atol=1e-8)


def test_origin_and_differential():
    for name in ("sphere2-in-r3", "hyperbola-in-minkowski", "greatcircle-in-s3"):
        c = chart(name)
        Phi = c.map_jet(2)
        np.testing.assert_allclose(Phi.const, c.frame.point, atol=1e-14)
        np.testing.assert_allclose(Phi.gradient().const, c.frame.matrix, atol=1e-8)


def test_radius_guard():
    c = chart("circle-in-plane")
    with pytest.raises(ValueError):
        c([0.5], [0.5])


def test_metric_jet_circle():
    gt = chart("circle-in-plane").metric_jet(4)
    assert gt.coefficient((0, 1))[0, 0] == pytest.approx(2.0, abs=1e-9)
    assert gt.coefficient((0, 2))[0, 0] == pytest.approx(2.0, abs=1e-9)
    assert np.max(np.abs(gt.coeffs[0, 1])) < 1e-9
    assert np.max(np.abs(gt.coeffs[1, 1, 1:])) < 1e-9


def test_metric_jet_flat_is_constant():
    c = chart("flat-affine", type=((1, 1), (1, 0)))
    gt = c.metric_jet(4)
    np.testing.assert_allclose(gt.const, c.frame.h, atol=1e-15)
    assert gt.nonconstant().max_abs() <= 1e-10


def test_metric_jet_sphere_offset():
    """(1+u)^2 times the normal-coordinate round metric, with u-blocks trivial."""
    order = 4
    gt = chart("sphere2-in-r3").metric_jet(order)
    z = Jet.seed(np.zeros(3), order)
    x, u = z[:2], z[2]
    r2 = x[0] * x[0] + x[1] * x[1]
    # (sin r / r)^2 and (1 - (sin r / r)^2) / r^2 as series in r^2
    s2 = 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 45.0
    q = 1.0 / 3.0 - 2.0 * r2 / 45.0
    want = [[s2 + x[a] * x[b] * q if a == b else x[a] * x[b] * q for b in range(2)] for a in range(2)]
    scale = (1.0 + u) * (1.0 + u)
    for a in range(2):
        for b in range(2):
            np.testing.assert_allclose(gt[a, b].coeffs, (scale * want[a][b]).coeffs, atol=1e-8)
        assert np.max(np.abs(gt.coeffs[a, 2])) < 1e-8
    np.testing.assert_allclose(gt[2, 2].coeffs, Jet.constant(1.0, 3, order).coeffs, atol=1e-8)


# -- properties -------------------------------------------------------------------

@pytest.mark.parametrize("name", ["sphere2-in-r3", "greatcircle-in-s3", "eps-perturbed-flat(seed=1)"])
def test_zero_normal_slice_lies_on_sigma(name):
    case = ALL_CASES[name]
    c = chart(case.name) if "(" not in name else None
    if c is None:
        g, sub = case.build()
        c = FermiChart(g, sub, adapted_frame(g, sub, case.h))
    x = np.full(c.k, 0.2)
    s = intrinsic_exp(c.metric, c.sub, c.frame, x)
    assert np.max(np.abs(c(x, np.zeros(c.n - c.k)) - c.sub.point(s))) <= 1e-9


@pytest.mark.parametrize("name", ["sphere2-in-r3", "latitude-in-s2", "hyperbola-in-minkowski"])
def test_normal_rays_are_geodesics(name):
    c = chart(name)
    x = np.full(c.k, 0.15)
    u = np.full(c.n - c.k, 0.2)
    nu, s = normal_transport(c.metric, c.sub, c.frame, x, return_path=True)
    q = c.sub.point(s)
    t1, t2 = 0.6, 0.4
    z1, v1 = geodesic_flow(c.metric, q, t1 * nu @ u, return_velocity=True)
    continued = geodesic_flow(c.metric, z1, v1 * (t2 / t1))
    assert np.max(np.abs(continued - c(x, (t1 + t2) * u))) <= 1e-8
    assert np.max(np.abs(z1 - c(x, t1 * u))) <= 1e-8


def _fitted_order(errors):
    logs = np.log2(np.asarray(errors))
    return float(-np.polyfit(np.arange(len(errors)), logs, 1)[0])


def test_convergence_order_against_closed_forms():
    circ = chart("circle-in-plane")
    sph = chart("sphere2-in-r3")
    steps = [8, 16, 32, 64]
    e_c = [max(np.max(np.abs(fermi_map(circ, [x], [u], nsteps=n) - circle_offset(x, u)))
               for x, u in [(0.45, 0.1), (-0.3, 0.3)]) for n in steps]
    x, u = np.array([0.3, -0.25]), 0.2
    e_s = [np.max(np.abs(fermi_map(sph, x, [u], nsteps=n) - sphere_offset(sph, x, u))) for n in steps]
    assert _fitted_order(e_c) >= 3.7
    assert _fitted_order(e_s) >= 3.7


def _fd_first_second(f, z, h):
    n = len(z)
    d1 = np.zeros((len(f(z)), n))
    d2 = np.zeros((len(f(z)), n, n))
    E = np.eye(n) * h
    for a in range(n):
        d1[:, a] = (f(z + E[a]) - f(z - E[a])) / (2 * h)
        for b in range(n):
            d2[:, a, b] = (f(z + E[a] + E[b]) - f(z + E[a] - E[b]) - f(z - E[a] + E[b])
                           + f(z - E[a] - E[b])) / (4 * h * h)
    return d1, d2


@pytest.mark.parametrize("name", ["sphere2-in-r3", "hyperbola-in-minkowski", "graph-family"])
def test_jet_matches_finite_differences_of_real_map(name):
    c = chart(name)
    k = c.k
    Phi = c.map_jet(2)

    def f(z):
        return fermi_map(c, z[:k], z[k:])

    d1, d2 = _fd_first_second(f, np.zeros(c.n), 1e-3)
    np.testing.assert_allclose(Phi.gradient().const, d1, atol=1e-6)
    eye = np.eye(c.n, dtype=int)
    hess = np.array([[Phi.coefficient(eye[a] + eye[b]) for b in range(c.n)] for a in range(c.n)])
    np.testing.assert_allclose(hess.transpose(2, 0, 1), d2, atol=1e-6)


def _boost(eta):
    return np.array([[math.cosh(eta), math.sinh(eta)], [math.sinh(eta), math.cosh(eta)]])


def _rot(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


@pytest.mark.parametrize("name,h_tan,h_nor", [
    ("sphere2-in-r3", _rot(0.7), -np.eye(1)),
    ("graph-family", np.diag([1.0, -1.0]) @ _rot(-1.1), np.eye(1)),
    ("greatcircle-in-s3", -np.eye(1), _rot(2.0)),
    ("eps-perturbed-flat(seed=0,11|10)", np.diag([1.0, -1.0]) @ _boost(0.3), -np.eye(1)),
])
def test_frame_action_equivariance(name, h_tan, h_nor):
    if name.startswith("eps"):
        from fermijet.catalog import eps_perturbed_flat
        case = eps_perturbed_flat(0, type=((1, 1), (1, 0)))
        g, sub = case.build()
        c = FermiChart(g, sub, adapted_frame(g, sub, case.h))
    else:
        c = chart(name)
    c2 = c.with_frame_action(h_tan, h_nor)
    hmat = np.zeros((c.n, c.n))
    hmat[: c.k, : c.k], hmat[c.k:, c.k:] = h_tan, h_nor
    assert np.max(np.abs(hmat.T @ c.frame.h @ hmat - c.frame.h)) < 1e-12
    rng = np.random.default_rng(7)
    for _ in range(3):
        z = rng.uniform(-0.12, 0.12, c.n)
        hz = hmat @ z
        assert np.max(np.abs(c2(z[: c.k], z[c.k:]) - c(hz[: c.k], hz[c.k:]))) <= 1e-8


def test_jet_richardson_error_is_recorded():
    c = chart("sphere2-in-r3")
    c.map_jet(3)
    assert 0.0 < c.jet_error[3] < 1e-6
