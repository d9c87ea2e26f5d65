"""Euler-theorem residuals and data-driven identification of dilation symmetry.

Two estimators live here:

* ``estimate_degree`` -- the practical homogeneity degree of a function for
  a known dilation, a sample mean of ``ln(g(x)/g(pi(x))) / ln|x|_d``.
* ``identify_generator`` -- the generator minimising a discretised Euler
  integral functional.  The box residual is affine in ``G``, so the
  (optionally trace-regularised) functional is a convex quadratic and is
  minimised by one linear least-squares solve.

Function handles take a batch ``(k, n)`` and return ``(k,)`` or ``(k, m)``.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .dilation import Dilation, DomainError, is_anti_hurwitz
from .networks import RankDeficiencyWarning, sample_annulus

__all__ = [
    "SamplerExhausted",
    "KDeltaSampler",
    "DegreeEstimate",
    "GeneratorEstimate",
    "SymmetryReport",
    "homogeneity_residual",
    "euler_derivative_residual",
    "delta_term",
    "integral_residual",
    "corner_residual",
    "corner_system",
    "generator_objective",
    "estimate_degree",
    "identify_generator",
]


class SamplerExhausted(RuntimeError):
    pass


def _eval(f, Y):
    """Evaluate ``f`` on a batch and return a ``(k, m)`` array."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    out = np.asarray(f(Y), dtype=float)
    return out.reshape(Y.shape[0], -1)


def _squeeze(v):
    return float(v[0]) if v.size == 1 else v


# -- residuals --------------------------------------------------------------

def homogeneity_residual(f, dil, nu, x, s):
    """``max |f(d(s) x) - exp(nu s) f(x)|`` over output components."""
    x = np.asarray(x, dtype=float)
    y = dil.apply(s, x)
    return float(np.max(np.abs(_eval(f, y) - np.exp(nu * s) * _eval(f, x))))


def euler_derivative_residual(f, G, nu, x, h_fd=None):
    """``max |grad f(x) . G x - nu f(x)|`` with a central-difference gradient."""
    x = np.asarray(x, dtype=float)
    G = np.asarray(G, dtype=float)
    n = x.size
    h = 1e-6 * (1.0 + np.linalg.norm(x)) if h_fd is None else float(h_fd)
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    pts = np.vstack([x + h * np.eye(n), x - h * np.eye(n), x[None]])
    F = _eval(f, pts)
    jac = (F[:n] - F[n:2 * n]) / (2 * h)  # (n, m): d f / d x_i
    return float(np.max(np.abs(jac.T @ (G @ x) - nu * F[-1])))


def delta_term(f, y, x, x_star, i, G):
    """Boundary term of the integral Euler identity along axis ``i``.

    ``[f(y|x_i) (G y|x_i)_i - f(y|x*_i) (G y|x*_i)_i] / (x_i - x*_i)`` where
    ``y|t`` replaces the i-th coordinate of ``y`` by ``t``.  Batched over
    rows of ``y``.
    """
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if x[i] == x_star[i]:
        raise ValueError(f"delta term needs x[{i}] != x_star[{i}]")
    G = np.asarray(G, dtype=float)
    Y = np.asarray(y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    Y1 = Y.copy()
    Y1[:, i] = x[i]
    Y0 = Y.copy()
    Y0[:, i] = x_star[i]
    num = _eval(f, Y1) * (Y1 @ G[i])[:, None] - _eval(f, Y0) * (Y0 @ G[i])[:, None]
    out = num / (x[i] - x_star[i])
    return _squeeze(out[0]) if single else out


def _box_contains_origin(x, x_star):
    lo = np.minimum(x, x_star)
    hi = np.maximum(x, x_star)
    return bool(np.all((lo <= 0) & (hi >= 0)))


def _integrand(f, Y, x, x_star, nu, G):
    val = (np.trace(G) + nu) * _eval(f, Y)
    for i in range(len(x)):
        if x[i] != x_star[i]:
            val = val - delta_term(f, Y, x, x_star, i, G)
    return val


def integral_residual(f, x, x_star, nu, G, order=4):
    """Integral Euler residual over the box spanned by ``x_star`` and ``x``.

    Evaluates ``int_{x*}^{x} (tr G + nu) f(y) - sum_i Delta_i dy`` (signed,
    iterated integrals from ``x*_i`` to ``x_i``) with a tensor-product
    Gauss-Legendre rule of ``order`` points per axis.  Vanishes for
    functions that are homogeneous of degree ``nu`` under ``expm(s G)``.
    """
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    G = np.asarray(G, dtype=float)
    if _box_contains_origin(x, x_star):
        raise DomainError("integration box contains the origin")
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (x - x_star)
    mid = 0.5 * (x + x_star)
    n = x.size
    nodes = mid[None, :] + half[None, :] * np.array(list(itertools.product(t, repeat=n)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=n))), axis=1)
    vals = _integrand(f, nodes, x, x_star, nu, G)
    return _squeeze(np.prod(half) * (weights @ vals))


def corner_residual(f, x_k, z, nu, G):
    """Corner-rule approximation of the integral residual on ``x_k + [0, z]``.

    ``prod(z) * 2**-n * sum_lambda ftilde(x_k + z, x_k, x_k + lambda*z, G)``
    where ``ftilde`` is the integrand of ``integral_residual``.
    """
    x_k = np.asarray(x_k, dtype=float)
    z = np.asarray(z, dtype=float)
    G = np.asarray(G, dtype=float)
    if np.any(z == 0):
        raise ValueError("box offset must have non-zero components")
    x = x_k + z
    if _box_contains_origin(x, x_k):
        raise DomainError("box contains the origin")
    n = x_k.size
    lam = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    vals = _integrand(f, x_k + lam * z, x, x_k, nu, G)
    return _squeeze(np.prod(z) * vals.mean(axis=0))


def corner_system(f, X, Z):
    """Affine decomposition of the corner residuals in ``(nu, G)``.

    For base points ``X`` (k, n) and offsets ``Z`` (k, n) returns ``c`` of
    shape (k, m) and ``B`` of shape (k, m, n, n) with

        corner_residual(f, X[j], Z[j], nu, G) == nu * c[j] + einsum('mab,ab', B[j], G)

    Every function value needed lives on a box corner, so ``f`` is evaluated
    exactly ``2**n`` times per box.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    k, n = X.shape
    if np.any(Z == 0):
        raise ValueError("box offsets must have non-zero components")
    lam = np.array(list(itertools.product((0.0, 1.0), repeat=n)))  # (2^n, n)
    corners = X[:, None, :] + lam[None, :, :] * Z[:, None, :]       # (k, 2^n, n)
    F = _eval(f, corners.reshape(-1, n)).reshape(k, lam.shape[0], -1)  # (k, 2^n, m)
    vol = np.prod(Z, axis=1)
    c = vol[:, None] * F.mean(axis=1)
    # mean over corners with lambda_a = 1 (resp. 0) of f(y) y_b; each such
    # corner is the i<-1 (i<-0) substitution of exactly two corners
    FY = F[:, :, :, None] * corners[:, :, None, :]  # (k, 2^n, m, n)
    hi = lam.T / lam.sum(axis=0)[:, None]          # (n, 2^n) averaging weights
    lo = (1 - lam).T / (1 - lam).sum(axis=0)[:, None]
    diff = np.einsum("al,klmb->kmab", hi, FY) - np.einsum("al,klmb->kmab", lo, FY)
    B = -vol[:, None, None, None] * diff / Z[:, None, :, None]
    idx = np.arange(n)
    B[:, :, idx, idx] += c[:, :, None]
    return c, B


def generator_objective(c, B, nu, G, xi=0.0):
    """Discretised functional ``mean |residual|^2 + xi tr(G^T G)``."""
    G = np.asarray(G, dtype=float)
    r = nu * c + np.einsum("kmab,ab->km", B, G)
    return float(np.mean(np.sum(r**2, axis=1)) + xi * np.sum(G * G))


# -- degree ---------------------------------------------------------------

@dataclass
class KDeltaSampler:
    """Rejection sampler for the admissible set of the degree estimator.

    Candidates are uniform in the Euclidean annulus ``region``; a point is
    kept when ``delta <= |x|_d <= 1``, ``|ln|x|_d| >= ln_band`` and both
    ``|g(x)|`` and ``|g(pi(x))|`` are at least ``delta`` for the scalarised
    output ``output_index``.
    """

    dilation: Dilation
    g: object
    delta: float = 0.01
    ln_band: float = 0.05
    region: tuple = (0.0, 1.0)
    seed: int = 0
    output_index: int = 0
    max_draws: int = 2_000_000

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.ln_band <= 0:
            raise ValueError("ln_band must be positive")

    def sample(self, M):
        rng = np.random.default_rng(self.seed)
        n = self.dilation.n
        r1, r2 = self.region
        xs, rhos, gx, gp = [], [], [], []
        kept = drawn = 0
        batch = max(256, 4 * M)
        while kept < M:
            if drawn >= self.max_draws:
                raise SamplerExhausted(
                    f"found only {kept} of {M} admissible points in {drawn} draws")
            X = sample_annulus(rng, batch, n, r1, r2)
            drawn += batch
            X = X[np.any(X != 0, axis=1)]
            s = self.dilation.log_norm(X)
            ok = (s >= np.log(self.delta)) & (s <= 0) & (np.abs(s) >= self.ln_band)
            X, s = X[ok], s[ok]
            if len(X) == 0:
                continue
            proj = self.dilation.apply(-s, X)
            a = _eval(self.g, X)[:, self.output_index]
            p = _eval(self.g, proj)[:, self.output_index]
            ok = (np.abs(a) >= self.delta) & (np.abs(p) >= self.delta)
            xs.append(X[ok]), rhos.append(s[ok]), gx.append(a[ok]), gp.append(p[ok])
            kept += int(ok.sum())
        cat = lambda v: np.concatenate(v)[:M]
        return cat(xs), cat(rhos), cat(gx), cat(gp)


@dataclass
class DegreeEstimate:
    nu_hat: float
    samples_used: int
    positivity_ok: bool
    terms: np.ndarray = field(repr=False)

    @property
    def spread(self):
        return float(np.std(self.terms)) if self.positivity_ok else float("nan")


def estimate_degree(g, dil, sampler, M):
    """Practical homogeneity degree of ``g`` for the dilation ``dil``.

    Draws ``M`` admissible points; if ``g(x)/g(pi(x)) > 0`` on all of them the
    estimate is the mean of ``ln(g(x)/g(pi(x))) / ln|x|_d``, otherwise
    ``positivity_ok`` is false and ``nu_hat`` is NaN.
    """
    if M < 1:
        raise ValueError("M must be positive")
    if sampler.dilation is not dil or sampler.g is not g:
        sampler = replace(sampler, dilation=dil, g=g)
    _, s, a, p = sampler.sample(M)
    ratio = a / p
    if np.any(ratio <= 0):
        return DegreeEstimate(float("nan"), M, False, np.full(M, np.nan))
    terms = np.log(ratio) / s
    return DegreeEstimate(float(np.mean(terms)), M, True, terms)


# -- generator ------------------------------------------------------------

ADMISSIBLE = ("full", "diagonal")


@dataclass
class GeneratorEstimate:
    G_hat: np.ndarray
    objective_value: float
    anti_hurwitz: bool
    admissible_class: str
    nu: float
    rank_deficient: bool = False


def _box_samples(rng, M, L, n, region, delta):
    """Base points in the annulus outside the cube ``B_delta`` and offsets in it."""
    r1, r2 = region
    X = np.empty((0, n))
    while len(X) < M:
        cand = sample_annulus(rng, 2 * M, n, r1, r2)
        cand = cand[np.max(np.abs(cand), axis=1) > delta]
        X = np.vstack([X, cand])
    X = X[:M]
    if L == 1:
        Z = np.full((1, n), delta)
    else:
        Z = rng.uniform(-delta, delta, size=(L, n))
    Xb = np.repeat(X, len(Z), axis=0)
    Zb = np.tile(Z, (M, 1))
    keep = ~np.array([_box_contains_origin(a + b, a) for a, b in zip(Xb, Zb)])
    keep &= np.all(Zb != 0, axis=1)
    return Xb[keep], Zb[keep]


def identify_generator(g, region, nu, admissible="diagonal", xi=None, M=4000, L=1,
                       delta=0.01, seed=0, n=None):
    """Generator of the practical dilation of ``g``.

    Minimises ``mean_{k,j} |corner_residual(g, x_k, z_j, nu, G)|^2 + xi tr(G^T G)``
    over full or diagonal ``G``; base points ``x_k`` are uniform in the
    annulus ``region``, offsets ``z_j`` are ``delta * ones`` for ``L == 1``
    and uniform in the cube ``[-delta, delta]^n`` otherwise.  ``xi`` defaults
    to 1e-6 for the full class and 0 for the diagonal class.
    """
    if admissible not in ADMISSIBLE:
        raise ValueError(f"admissible class must be one of {ADMISSIBLE}")
    if xi is None:
        xi = 1e-6 if admissible == "full" else 0.0
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if n is None:
        n = getattr(g, "n_inputs", None) or g.dilation.n
    rng = np.random.default_rng(seed)
    X, Z = _box_samples(rng, M, L, n, region, delta)
    c, B = corner_system(g, X, Z)
    G_hat, rank_def = _solve_generator(c, B, nu, admissible, xi)
    obj = generator_objective(c, B, nu, G_hat, xi)
    return GeneratorEstimate(G_hat, obj, is_anti_hurwitz(G_hat), admissible, float(nu), rank_def)


def _solve_generator(c, B, nu, admissible, xi):
    k, m, n, _ = B.shape
    if admissible == "diagonal":
        idx = np.arange(n)
        design = B[:, :, idx, idx].reshape(k * m, n)
    else:
        design = B.reshape(k * m, n * n)
    rhs = -nu * c.reshape(k * m)
    design = design / np.sqrt(k)
    rhs = rhs / np.sqrt(k)
    p = design.shape[1]
    if xi > 0:
        design = np.vstack([design, np.sqrt(xi) * np.eye(p)])
        rhs = np.concatenate([rhs, np.zeros(p)])
    cond = np.finfo(float).eps * max(design.shape)
    theta, _, rank, _ = sla.lstsq(design, rhs, cond=cond, lapack_driver="gelsd")
    rank_def = rank < p
    if rank_def and xi == 0:
        warnings.warn(f"generator system is rank deficient (rank {rank} < {p}); "
                      "returning the minimum-norm solution", RankDeficiencyWarning, stacklevel=3)
    G = np.diag(theta) if admissible == "diagonal" else theta.reshape(n, n)
    return G, bool(rank_def)


# -- reports ---------------------------------------------------------------

@dataclass
class SymmetryReport:
    nu_hat: Optional[float] = None
    positivity_ok: Optional[bool] = None
    G_hat: Optional[list] = None
    objective: Optional[float] = None
    anti_hurwitz: Optional[bool] = None
    config: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)

    def to_dict(self):
        def clean(v):
            if isinstance(v, float) and not np.isfinite(v):
                return None
            return v
        out = {
            "nu_hat": clean(self.nu_hat),
            "positivity_ok": self.positivity_ok,
            "G_hat": self.G_hat,
            "objective": clean(self.objective),
            "anti_hurwitz": self.anti_hurwitz,
            "config": self.config,
        }
        if self.runs:
            out["runs"] = self.runs
        return out

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text
