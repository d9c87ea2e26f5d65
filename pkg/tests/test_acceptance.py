"""Acceptance suite; each test name carries its criterion number."""

import csv
import io
import itertools
import time

import numpy as np
import pytest

from homsym.applications.control_norm import norm_refinement_harness
from homsym.applications.moments import recognition_harness
from homsym.applications.rigid_body import GENERATOR, rigid_body_dilation
from homsym.applications.table1 import table1_harness
from homsym.dilation import Dilation
from homsym.symmetry import KDeltaSampler, estimate_degree, identify_generator, integral_residual

# -- helpers ---------------------------------------------------------------


def random_dilation(rng, n):
    """Random monotone dilation: G = P^-1 (H + K) with H SPD, K skew, so PG + G^T P = 2H."""
    kind = rng.integers(3)
    if kind == 0:
        return Dilation.weighted(rng.uniform(0.3, 3.0, n))
    M = rng.normal(size=(n, n))
    H = M @ M.T / n + 0.3 * np.eye(n)
    K = rng.normal(size=(n, n))
    K = 0.5 * (K - K.T)
    if kind == 1:
        return Dilation(H + K)
    R = rng.normal(size=(n, n))
    P = R @ R.T / n + 0.5 * np.eye(n)
    return Dilation(np.linalg.solve(P, H + K), P)


def points_with_norm(dil, rng, k, lo=0.1, hi=10.0):
    """Points whose canonical norm is log-uniform in [lo, hi]."""
    X = dil.project(rng.normal(size=(k, dil.n)))
    s = rng.uniform(np.log(lo), np.log(hi), size=k)
    return dil.apply(s, X), np.exp(s)


def gauss_oracle(f, x, x_star, nu, G, order=64):
    """Independent tensor Gauss-Legendre evaluation of the integral Euler residual."""
    n = len(x)
    t, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    grids = [0.5 * (x[i] + x_star[i]) + 0.5 * (x[i] - x_star[i]) * t for i in range(n)]
    for idx in itertools.product(range(order), repeat=n):
        y = np.array([grids[i][j] for i, j in enumerate(idx)])
        val = (np.trace(G) + nu) * f(y[None])[0]
        for i in range(n):
            y1, y0 = y.copy(), y.copy()
            y1[i], y0[i] = x[i], x_star[i]
            val -= (f(y1[None])[0] * (G[i] @ y1) - f(y0[None])[0] * (G[i] @ y0)) / (x[i] - x_star[i])
        total += np.prod([w[j] for j in idx]) * val
    return total * np.prod(0.5 * (np.asarray(x) - np.asarray(x_star)))


quadratic = lambda X: np.sum(X**2, axis=1)
shifted = lambda X: X[:, 0] ** 2 + 1.0


# -- shared harness runs ---------------------------------------------------

@pytest.fixture(scope="module")
def table1_reports():
    out = {}
    for seed in (0, 1, 2):
        t0 = time.perf_counter()
        out[seed] = (table1_harness(seed), time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def norm_reports():
    t0 = time.perf_counter()
    reps = {N: norm_refinement_harness(N=N, seed=0) for N in (10, 20)}
    return reps, time.perf_counter() - t0


@pytest.fixture(scope="module")
def recognition_report():
    return recognition_harness(seed=0)


# -- 1 ---------------------------------------------------------------------

def test_criterion_1_norm_homogeneity():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    cases = 0
    for n in (2, 3, 6):
        for _ in range(25):
            dil = random_dilation(rng, n)
            X = rng.normal(size=(14, n)) * rng.uniform(0.1, 5.0)
            s = rng.uniform(-2.0, 2.0, size=14)
            lhs = dil.norm(dil.apply(s, X))
            rhs = np.exp(s) * dil.norm(X)
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / rhs)))
            cases += len(X)
    elapsed = time.perf_counter() - t0
    assert cases >= 1000
    assert worst <= 1e-8
    assert elapsed < 5.0


def test_criterion_1_standard_is_euclidean():
    rng = np.random.default_rng(2)
    for n in (2, 3, 6):
        X = rng.normal(size=(200, n)) * rng.uniform(0.01, 100.0, size=(200, 1))
        r = np.linalg.norm(X, axis=1)
        assert np.max(np.abs(Dilation.standard(n).norm(X) - r) / r) <= 1e-12


# -- 2 ---------------------------------------------------------------------

GRADIENT_DILATIONS = [
    Dilation.weighted([1.0, 2.0]),
    Dilation(np.diag([5.0, 4.0]), np.array([[0.1157, 0.0194], [0.0194, 0.1186]])),
    Dilation(np.array([[1.0, -3.0], [3.0, 1.0]])),
    Dilation(GENERATOR),
]


@pytest.mark.parametrize("dil", GRADIENT_DILATIONS, ids=["weighted", "weighted_P", "spiral", "rigid"])
def test_criterion_2_gradient(dil):
    rng = np.random.default_rng(3)
    X, rho = points_with_norm(dil, rng, 25)
    grad = dil.gradient(X)
    worst = 0.0
    for x, g in zip(X, grad):
        h = 1e-5 * np.linalg.norm(x)
        fd = np.array([(dil.norm(x + h * e) - dil.norm(x - h * e)) / (2 * h) for e in np.eye(dil.n)])
        worst = max(worst, np.linalg.norm(fd - g) / np.linalg.norm(g))
    assert worst <= 1e-5
    euler = np.einsum("ki,ki->k", grad, X @ dil.G.T)
    assert np.max(np.abs(euler - rho)) <= 1e-8


# -- 3 ---------------------------------------------------------------------

def test_criterion_3_homogeneous_residual_vanishes():
    rng = np.random.default_rng(4)
    G = np.eye(2)
    checked = 0
    while checked < 50:
        a = rng.uniform(-2, 2, 2)
        b = a + rng.uniform(0.05, 1.0, 2) * rng.choice([-1, 1], 2)
        if np.all(np.minimum(a, b) <= 0) and np.all(np.maximum(a, b) >= 0):
            continue
        assert abs(integral_residual(quadratic, b, a, 2.0, G)) <= 1e-10
        checked += 1


def test_criterion_3_non_homogeneous_and_oracle():
    G = np.eye(2)
    x_star, x = np.array([1.0, 1.0]), np.array([1.1, 1.1])
    r = integral_residual(shifted, x, x_star, 2.0, G)
    assert abs(r) > 1e-3
    assert abs(r - gauss_oracle(shifted, x, x_star, 2.0, G)) <= 1e-9
    rng = np.random.default_rng(5)
    for _ in range(3):
        a = rng.uniform(0.5, 2.0, 2)
        b = a + rng.uniform(0.1, 0.5, 2)
        Gr = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
        for f in (quadratic, shifted):
            assert abs(integral_residual(f, b, a, 1.5, Gr) - gauss_oracle(f, b, a, 1.5, Gr)) <= 1e-9


# -- 4 ---------------------------------------------------------------------

def test_criterion_4_exact_degree(rigid_body):
    dil = rigid_body_dilation()
    est = estimate_degree(rigid_body, dil, KDeltaSampler(dil, rigid_body, 0.01, 0.01, (0.5, 1.0), 0), 200)
    assert est.positivity_ok
    assert abs(est.nu_hat - 2.0) <= 1e-9


def test_criterion_4_trained_degree(rigid_ann):
    t0 = time.perf_counter()
    dil = rigid_body_dilation()
    est = estimate_degree(rigid_ann, dil, KDeltaSampler(dil, rigid_ann, 0.01, 0.01, (0.95, 1.05), 0), 2000)
    assert est.positivity_ok
    assert abs(est.nu_hat - 2.0) <= 0.1
    assert time.perf_counter() - t0 < 120


# -- 5 ---------------------------------------------------------------------

def test_criterion_5_diagonal_generator(rigid_ann):
    est = identify_generator(rigid_ann, (0.98, 1.02), 1.0, "diagonal", M=4000, delta=0.01, seed=0)
    target = np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
    assert np.all(np.abs(np.diag(est.G_hat) - target) <= 0.05 * target)
    assert est.anti_hurwitz


@pytest.mark.parametrize("nu", [0.0, -1.0])
def test_criterion_5_non_positive_degree_rejected(rigid_ann, nu):
    est = identify_generator(rigid_ann, (0.98, 1.02), nu, "diagonal", M=4000, delta=0.01, seed=0)
    assert not est.anti_hurwitz


def test_criterion_5_full_class_regularized():
    est = identify_generator(quadratic, (3.0, 5.0), 2.0, "full", xi=1e-4, M=2000, delta=0.1, seed=0, n=2)
    assert np.linalg.norm(est.G_hat - np.eye(2)) <= 0.05


# -- 6 ---------------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_criterion_6_table1(table1_reports, seed):
    rep, elapsed = table1_reports[seed]
    err = rep.errors
    assert err["4"]["ann"] >= 10 * err["4"]["hann_nu2"]
    assert err["0"]["hann_nu2"] <= 2 * err["0"]["ann"]
    lo, hi = err["4"]["hann_nu2"], err["4"]["ann"]
    for col in ("hann_nu_eps", "hann_G_eps"):
        assert lo <= err["4"][col] <= hi
    assert elapsed < 600


# -- 7 ---------------------------------------------------------------------

def test_criterion_7_norm_refinement(norm_reports):
    reps, elapsed = norm_reports
    assert 0.004 <= reps[10].explicit_error <= 0.012
    assert reps[10].explicit_error >= 1.5 * reps[10].refined_error
    assert reps[20].refined_error <= 1e-3
    assert elapsed < 60


# -- 8 ---------------------------------------------------------------------

def test_criterion_8_recognition(recognition_report):
    rep = recognition_report
    assert rep.train_accuracy == 1.0
    assert rep.zoom_accuracy >= 0.9
    assert rep.noise_accuracy >= 0.9


def test_criterion_8_analytic_invariance(recognition_report):
    assert recognition_report.analytic_invariant


# -- 9 ---------------------------------------------------------------------

def _csv_bytes(rows):
    buf = io.StringIO()
    csv.writer(buf).writerows(rows)
    return buf.getvalue().encode()


def test_criterion_9_table1_deterministic(table1_reports):
    first = _csv_bytes(table1_reports[0][0].rows())
    assert _csv_bytes(table1_harness(0).rows()) == first


def test_criterion_9_recognition_deterministic(recognition_report):
    assert _csv_bytes(recognition_harness(seed=0).rows()) == _csv_bytes(recognition_report.rows())


def test_criterion_9_norm_deterministic(norm_reports, tmp_path):
    reps, _ = norm_reports
    again = norm_refinement_harness(N=10, seed=0)
    assert _csv_bytes(again.summary_rows()) == _csv_bytes(reps[10].summary_rows())
    reps[10].write_level_lines(tmp_path / "a.csv")
    again.write_level_lines(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
