"""Explicit homogeneous norm for a planar weighted dilation and its refinement.

The dilation is ``d(s) = diag(e^{5s}, e^{4s})`` with the quadratic weight
``P`` below.  A closed-form norm built from ``Q`` approximates the canonical
norm of ``(d, P)``; a degree-1 homogeneous network trained on the unit
sphere ``S = {x^T P x = 1}`` corrects it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..dilation import Dilation
from ..networks import LabeledDataset, random_features, train_hom
from ..rng import stream

WEIGHT_P = np.array([[0.1157, 0.0194], [0.0194, 0.1186]])
EXPLICIT_Q = np.array([[0.1225, 0.0176], [0.0176, 0.0720]])
GENERATOR = np.diag([5.0, 4.0])
EVAL_POINTS = 20000


def control_dilation():
    return Dilation(GENERATOR, WEIGHT_P)


class ExplicitHomNorm:
    """``(Psi(x)^T Q Psi(x))^(1/10)`` with ``Psi(x) = (x1, |x2|^(5/4) sign x2)``."""

    def __init__(self, Q=EXPLICIT_Q):
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (2, 2) or not np.allclose(Q, Q.T):
            raise ValueError("Q must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(Q)[0] <= 0:
            raise ValueError("Q must be positive definite")
        self.Q = Q

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        if X.shape[-1] != 2:
            raise ValueError("explicit norm is defined on R^2")
        psi = np.stack([X[:, 0], np.abs(X[:, 1]) ** 1.25 * np.sign(X[:, 1])], axis=1)
        val = np.maximum(np.einsum("ki,ij,kj->k", psi, self.Q, psi), 0.0) ** 0.1
        return val[0] if x.ndim == 1 else val


def explicit_hom_norm(x, Q=EXPLICIT_Q):
    return ExplicitHomNorm(Q)(x)


def sphere_points(angles, P=WEIGHT_P):
    """Points ``P^{-1/2} (cos t, sin t)`` on ``{x^T P x = 1}``."""
    w, V = np.linalg.eigh(P)
    P_half_inv = (V / np.sqrt(w)) @ V.T
    angles = np.asarray(angles, dtype=float)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1) @ P_half_inv.T


@dataclass
class NormRefinementReport:
    n_hidden: int
    samples: int
    seed: int
    explicit_error: float
    refined_error: float
    level_lines: list = field(default_factory=list)   # (x1, x2, label)
    model: object = field(default=None, repr=False)

    @property
    def improvement(self):
        return self.explicit_error / self.refined_error

    def summary_rows(self):
        yield ("n_hidden", "samples", "seed", "explicit_error", "refined_error")
        yield (str(self.n_hidden), str(self.samples), str(self.seed),
               repr(self.explicit_error), repr(self.refined_error))

    def write_level_lines(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("x1", "x2", "label"))
            for x1, x2, label in self.level_lines:
                w.writerow((repr(float(x1)), repr(float(x2)), label))


def norm_refinement_harness(N=10, M=1000, seed=0, eval_points=EVAL_POINTS, level_points=400):
    """Fit ``|x|_* C sigma(A d(-ln|x|_*) x + b) = 1`` on ``S``; report sup errors on ``S``.

    Errors are measured against the canonical norm, which equals 1 on ``S``
    and is evaluated by bisection rather than assumed.
    """
    dil = control_dilation()
    explicit = ExplicitHomNorm()
    train = sphere_points(stream(seed, "norm.train").uniform(0.0, 2 * np.pi, size=M))
    A, b = random_features(2, N, stream(seed, "norm.features"))
    refined = train_hom(A, b, "sigmoid", dil, 1.0, LabeledDataset(train, np.ones(M)),
                        norm=explicit, seed=seed)

    S = sphere_points(np.linspace(0.0, 2 * np.pi, eval_points, endpoint=False))
    truth = dil.norm(S)
    explicit_err = float(np.max(np.abs(explicit(S) - truth)))
    refined_err = float(np.max(np.abs(refined(S)[:, 0] - truth)))

    # each unit sphere, traced by pushing S along the dilation orbits
    base = sphere_points(np.linspace(0.0, 2 * np.pi, level_points, endpoint=False))
    lines = []
    for label, nrm in (("canonical", dil.norm), ("explicit", explicit),
                       ("refined", lambda X: refined(X)[:, 0])):
        pts = dil.apply(-np.log(nrm(base)), base)
        lines.extend((p[0], p[1], label) for p in pts)
    return NormRefinementReport(N, M, seed, explicit_err, refined_err, lines, refined)
