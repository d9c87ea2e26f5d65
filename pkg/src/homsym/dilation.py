"""Linear dilation groups and canonical homogeneous norms.

A linear dilation is the matrix group ``d(s) = expm(s G)`` generated by an
anti-Hurwitz matrix ``G``.  Together with an SPD weight ``P`` for which
``P G + G^T P`` is positive definite, the map ``s -> |d(s) x|_P`` is strictly
increasing and the canonical homogeneous norm ``|x|_d = exp(s_x)`` is the
unique solution of ``|d(-s_x) x|_P = 1``.

All functions accept a single vector of shape ``(n,)`` or a batch of shape
``(k, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "DomainError",
    "NormBounds",
    "Dilation",
    "is_anti_hurwitz",
    "check_monotonicity",
    "weighted_norm",
    "dilate",
    "canonical_norm",
    "project",
    "norm_bounds",
    "norm_gradient",
]

EIG_TOL = 1e-9
TOL_S = 1e-12
TOL_VALUE = 1e-12
ZERO_NORM = 1e-300
SYM_TOL = 1e-10

# eigenbasis exponentials are trusted only for well-conditioned eigenvectors
_EIG_COND_MAX = 1e3


class DomainError(ValueError):
    """Raised when an operation is undefined at the given point (e.g. x = 0)."""


@dataclass(frozen=True)
class NormBounds:
    """Exponents of the sandwich ``sigma1(|x|_d) <= |x| <= sigma2(|x|_d)``."""

    alpha: float
    beta: float

    def sigma1(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= 1.0, rho**self.alpha, rho**self.beta)

    def sigma2(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= 1.0, rho**self.beta, rho**self.alpha)


def _as_square(M, name):
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def is_anti_hurwitz(G, tol=EIG_TOL):
    """True if every eigenvalue of ``G`` has real part above ``tol``."""
    G = _as_square(G, "G")
    return bool(np.min(np.linalg.eigvals(G).real) > tol)


def check_monotonicity(G, P, tol=EIG_TOL):
    """Check the LMI ``P G + G^T P > 0, P > 0``.

    Eigenvalues must exceed ``tol`` times the largest eigenvalue of ``P``
    (for ``P = I`` this is the plain threshold ``tol``).  Raises
    ``ValueError`` if ``P`` is not symmetric within ``SYM_TOL`` relative to
    its largest entry.
    """
    G = _as_square(G, "G")
    P = _as_square(P, "P")
    if G.shape != P.shape:
        raise ValueError(f"G {G.shape} and P {P.shape} differ in shape")
    if np.max(np.abs(P - P.T)) > SYM_TOL * np.max(np.abs(P)):
        raise ValueError("P is not symmetric")
    P = 0.5 * (P + P.T)
    # thresholds scale with |P| so that rescaling the weight is harmless
    ev = np.linalg.eigvalsh(P)
    scale = max(abs(ev[-1]), np.finfo(float).tiny)
    if ev[0] <= tol * scale:
        return False
    return bool(np.linalg.eigvalsh(P @ G + G.T @ P)[0] > tol * scale)


def weighted_norm(x, P):
    """``sqrt(x^T P x)`` along the last axis, rescaled to avoid under/overflow."""
    x = np.asarray(x, dtype=float)
    m = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where((m > 0) & np.isfinite(m), m, 1.0)
    y = x / safe
    q = np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", y, P, y), 0.0))
    return np.where(np.isfinite(m[..., 0]), q * safe[..., 0], np.inf)


class Dilation:
    """Strictly monotone linear dilation ``d(s) = expm(s G)`` with weight ``P``.

    Parameters
    ----------
    G : (n, n) array_like
        Generator.  Must satisfy ``P G + G^T P > 0``.
    P : (n, n) array_like, optional
        SPD weight of the norm ``sqrt(x^T P x)``; identity by default.
    tol : float
        Eigenvalue positivity threshold for the LMI check.

    Instances are immutable and safe to share.
    """

    def __init__(self, G, P=None, tol=EIG_TOL):
        G = _as_square(G, "G")
        P = np.eye(G.shape[0]) if P is None else _as_square(P, "P")
        if not check_monotonicity(G, P, tol):
            raise ValueError("dilation is not strictly monotone: P G + G^T P must be positive definite")
        P = 0.5 * (P + P.T)
        self._G = G
        self._P = P
        self.tol = tol
        for arr in (self._G, self._P):
            arr.setflags(write=False)

        w, V = np.linalg.eigh(P)
        self._P_half = (V * np.sqrt(w)) @ V.T
        self._P_half_inv = (V / np.sqrt(w)) @ V.T
        M = self._P_half @ G @ self._P_half_inv
        ev = np.linalg.eigvalsh(M + M.T)
        self._bounds = NormBounds(alpha=float(ev[-1] / 2), beta=float(ev[0] / 2))

        off = G - np.diag(np.diag(G))
        self._diag = np.diag(G).copy() if not np.any(off) else None
        self._eig = None
        if self._diag is None:
            lam, W = np.linalg.eig(G)
            if np.linalg.cond(W) < _EIG_COND_MAX:
                self._eig = (lam, W, np.linalg.inv(W))

    @classmethod
    def standard(cls, n):
        return cls(np.eye(n))

    @classmethod
    def weighted(cls, r, P=None):
        """Weighted dilation ``diag(exp(r_1 s), ..., exp(r_n s))``."""
        return cls(np.diag(np.asarray(r, dtype=float)), P)

    @property
    def G(self):
        return self._G

    @property
    def P(self):
        return self._P

    @property
    def n(self):
        return self._G.shape[0]

    @property
    def bounds(self):
        return self._bounds

    def __repr__(self):
        return f"Dilation(n={self.n}, alpha={self._bounds.alpha:.4g}, beta={self._bounds.beta:.4g})"

    def to_dict(self):
        return {"n": self.n, "G": self._G.tolist(), "P": self._P.tolist()}

    @classmethod
    def from_dict(cls, d):
        n = int(d["n"])
        G = np.asarray(d["G"], dtype=float).reshape(n, n)
        P = np.asarray(d.get("P", np.eye(n)), dtype=float).reshape(n, n)
        return cls(G, P)

    # -- group action -----------------------------------------------------

    def matrix(self, s):
        """``expm(s G)`` by scaling-and-squaring Pade."""
        return sla.expm(float(s) * self._G)

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,) or x.ndim > 2:
            raise ValueError(f"expected vector(s) of dimension {self.n}, got shape {x.shape}")
        return x

    def apply(self, s, x):
        """Batched action ``d(s_k) x_k``.

        ``s`` broadcasts against the leading axis of ``x``.  Diagonal
        generators use exact scalar exponentials; well-conditioned
        diagonalisable ones use their eigenbasis; otherwise a stack of dense
        Pade exponentials is formed.
        """
        x = self._check_x(x)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        s = np.broadcast_to(np.asarray(s, dtype=float), X.shape[:1])
        if self._diag is not None:
            out = X * np.exp(s[:, None] * self._diag)
        elif self._eig is not None:
            lam, W, Winv = self._eig
            coeff = np.exp(s[:, None] * lam) * (X @ Winv.T)
            out = (coeff @ W.T).real
        else:
            out = np.einsum("kij,kj->ki", sla.expm(s[:, None, None] * self._G), X)
        return out[0] if single else out

    def weighted_norm(self, x):
        return weighted_norm(x, self._P)

    # -- canonical norm ---------------------------------------------------

    def _log_norm(self, X, tol_s=TOL_S):
        """Solve ``|d(-s) x| = 1`` by bisection; returns s (NaN where x = 0)."""
        r = weighted_norm(X, self._P)
        s = np.full(r.shape, np.nan)
        live = r >= ZERO_NORM
        if not np.any(live):
            return s
        lr = np.log(r[live])
        a, b = self._bounds.alpha, self._bounds.beta
        lo = np.minimum(lr / a, lr / b)
        hi = np.maximum(lr / a, lr / b)
        pad = 1e-9 * (1.0 + np.abs(hi))
        lo, hi = lo - pad, hi + pad
        Xl = X[live]
        result = np.empty(lo.shape)
        active = np.arange(lo.size)
        for _ in range(200):
            if active.size == 0:
                break
            mid = 0.5 * (lo[active] + hi[active])
            with np.errstate(over="ignore", invalid="ignore"):
                v = weighted_norm(self.apply(-mid, Xl[active]), self._P)
            # wide brackets can overflow d(-mid) x; that only happens for mid < 0,
            # where the root lies above mid
            above = np.where(np.isfinite(v), v > 1.0, mid < 0)
            lo[active] = np.where(above, mid, lo[active])
            hi[active] = np.where(above, hi[active], mid)
            done = (np.abs(v - 1.0) <= TOL_VALUE) | (hi[active] - lo[active] <= tol_s)
            result[active[done]] = np.where(np.abs(v[done] - 1.0) <= TOL_VALUE, mid[done],
                                            0.5 * (lo[active[done]] + hi[active[done]]))
            active = active[~done]
        if active.size:
            raise ArithmeticError("bisection for the canonical norm did not converge")
        s[live] = result
        return s

    def log_norm(self, x):
        """``ln |x|_d``; ``-inf`` at the origin."""
        x = self._check_x(x)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input")
        s = self._log_norm(np.atleast_2d(x))
        s = np.where(np.isnan(s), -np.inf, s)
        return s[0] if x.ndim == 1 else s

    def norm(self, x):
        """Canonical homogeneous norm ``|x|_d`` (0 at the origin)."""
        return np.exp(self.log_norm(x))

    __call__ = norm

    def project(self, x):
        """Homogeneous projector ``d(-ln|x|_d) x`` onto the unit sphere."""
        x = self._check_x(x)
        s = self.log_norm(x)
        if np.any(np.isneginf(s)):
            raise DomainError("projector is undefined at the origin")
        return self.apply(-s, x)

    def gradient(self, x):
        """Closed-form gradient of ``|x|_d`` (row vector(s))."""
        x = self._check_x(x)
        s = self.log_norm(x)
        if np.any(np.isneginf(s)):
            raise DomainError("the homogeneous norm is not differentiable at the origin")
        X = np.atleast_2d(x)
        S = np.atleast_1d(s)
        Z = self.apply(-S, X)
        # z^T P d(-s), assembled as d(-s)^T P z
        PZ = Z @ self._P
        if self._diag is not None:
            row = PZ * np.exp(-S[:, None] * self._diag)
        else:
            row = np.stack([self.matrix(-sk).T @ pz for sk, pz in zip(S, PZ)])
        denom = np.einsum("ki,ij,kj->k", Z, self._P @ self._G, Z)
        grad = np.exp(S)[:, None] * row / denom[:, None]
        return grad[0] if x.ndim == 1 else grad


def _require(dil):
    if not isinstance(dil, Dilation):
        raise TypeError("expected a Dilation")
    return dil


def dilate(dil, s, x):
    """``expm(s G) x`` using a dense Pade exponential."""
    x = _require(dil)._check_x(x)
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    return x @ dil.matrix(s).T


def canonical_norm(dil, x):
    return _require(dil).norm(x)


def project(dil, x):
    return _require(dil).project(x)


def norm_bounds(dil):
    return _require(dil).bounds


def norm_gradient(dil, x):
    return _require(dil).gradient(x)
