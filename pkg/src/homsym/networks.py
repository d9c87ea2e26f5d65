"""Shallow random-feature networks and their homogeneous counterparts.

A shallow network evaluates ``C sigma(A x + b)``.  Its homogeneous version
evaluates ``|x|_d**nu * C sigma(A pi(x) + b)`` where ``pi`` projects onto the
unit sphere of a homogeneous norm along the dilation orbit.  Hidden weights
are random and fixed; only ``C`` is fitted, by linear least squares.
"""

from __future__ import annotations

import csv
import enum
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.special import expit

from .dilation import Dilation, DomainError

logger = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-10


class RankDeficiencyWarning(UserWarning):
    pass


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"

    def __call__(self, t):
        if self is Activation.SIGMOID:
            return expit(t)
        return np.tanh(t)


@dataclass(eq=False)
class ShallowNet:
    """One-hidden-layer network ``C sigma(A x + b)``."""

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    activation: Activation = Activation.SIGMOID
    seed: Optional[int] = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.activation = Activation(self.activation)
        N = self.A.shape[0]
        if self.b.shape != (N,) or self.C.shape[1] != N:
            raise ValueError(
                f"inconsistent shapes A {self.A.shape}, b {self.b.shape}, C {self.C.shape}")
        for name in ("A", "b", "C"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def n_inputs(self):
        return self.A.shape[1]

    @property
    def n_hidden(self):
        return self.A.shape[0]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    def hidden(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_inputs:
            raise ValueError(f"expected input dimension {self.n_inputs}, got {x.shape[-1]}")
        return self.activation(x @ self.A.T + self.b)

    def __call__(self, x):
        return self.hidden(x) @ self.C.T


@dataclass(eq=False)
class HomNet:
    """Homogeneous network ``|x|^nu C sigma(A pi(x) + b)``.

    ``norm`` is any homogeneous norm for ``dilation`` (callable on batches);
    the canonical norm of the dilation is used when it is omitted.  The
    projection is then ``d(-ln norm(x)) x``.
    """

    net: ShallowNet
    dilation: Dilation
    degree: float
    norm: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.net.n_inputs != self.dilation.n:
            raise ValueError(
                f"network input dimension {self.net.n_inputs} != dilation dimension {self.dilation.n}")
        self.degree = float(self.degree)

    def _norm(self, x):
        return self.dilation.norm(x) if self.norm is None else self.norm(x)

    def features(self, x):
        """Hidden features scaled by ``|x|^nu``; rows correspond to inputs."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        rho = np.asarray(self._norm(X), dtype=float)
        if np.any(rho <= 0):
            raise DomainError("homogeneous network features are undefined at the origin")
        proj = self.dilation.apply(-np.log(rho), X)
        return rho[:, None] ** self.degree * self.net.hidden(proj)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        rho = np.asarray(self._norm(X), dtype=float)
        zero = rho <= 0
        if np.any(zero) and self.degree <= 0:
            raise DomainError("non-positive degree: the homogeneous network is undefined at the origin")
        out = np.zeros((X.shape[0], self.net.n_outputs))
        if np.any(~zero):
            out[~zero] = self.features(X[~zero]) @ self.net.C.T
        return out[0] if x.ndim == 1 else out


@dataclass(eq=False)
class LabeledDataset:
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.outputs.ndim == 1:
            self.outputs = self.outputs[:, None]
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError("inputs and outputs differ in length")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ValueError("dataset has non-finite entries")

    def __len__(self):
        return self.inputs.shape[0]

    @classmethod
    def from_function(cls, f, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(X, f(X))

    def to_csv(self, path):
        n, m = self.inputs.shape[1], self.outputs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(m)])
            for xi, yi in zip(self.inputs, self.outputs):
                w.writerow([repr(float(v)) for v in xi] + [repr(float(v)) for v in yi])

    @classmethod
    def from_csv(cls, path):
        """Read ``x1..xn,y1..ym`` CSV; raises ``ValueError`` on malformed rows."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        n = sum(1 for h in header if h.startswith("x"))
        m = sum(1 for h in header if h.startswith("y"))
        if n == 0 or m == 0 or header != [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(m)]:
            raise ValueError(f"{path}: header must be x1..xn,y1..ym, got {header}")
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != n + m:
                raise ValueError(f"{path}:{lineno}: expected {n + m} columns, got {len(row)}")
            data.append([float(v) for v in row])
        if not data:
            raise ValueError(f"{path}: no data rows")
        data = np.array(data)
        return cls(data[:, :n], data[:, n:])


def random_features(n_inputs, n_hidden, rng):
    """Hidden weights ``A`` and biases ``b`` i.i.d. uniform on [-1, 1]."""
    A = rng.uniform(-1.0, 1.0, size=(n_hidden, n_inputs))
    b = rng.uniform(-1.0, 1.0, size=n_hidden)
    return A, b


def solve_ridge(Phi, Y, ridge=DEFAULT_RIDGE):
    """``argmin_W |Phi W - Y|_F^2 + ridge |W|_F^2`` via an orthogonal factorisation.

    The ridge term is folded in as extra rows, so the solve never forms the
    normal equations.  With ``ridge == 0`` a rank-deficient ``Phi`` yields the
    minimum-norm solution and a ``RankDeficiencyWarning``.
    """
    Phi = np.asarray(Phi, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    k = Phi.shape[1]
    Y2 = Y.reshape(len(Y), -1)
    if ridge > 0:
        Phi = np.vstack([Phi, np.sqrt(ridge) * np.eye(k)])
        Y2 = np.vstack([Y2, np.zeros((k, Y2.shape[1]))])
    # singular values below eps * max(shape) relative count as zero
    W, _, rank, _ = sla.lstsq(Phi, Y2, cond=np.finfo(float).eps * max(Phi.shape), lapack_driver="gelsd")
    W = W.reshape((k,) + Y.shape[1:])
    if rank < k:
        msg = f"least-squares system is rank deficient (rank {rank} < {k})"
        if ridge == 0:
            warnings.warn(msg + "; returning the minimum-norm solution", RankDeficiencyWarning, stacklevel=2)
        else:
            logger.debug(msg)
    return W


def train_output_layer(A, b, activation, data, ridge=DEFAULT_RIDGE, seed=None):
    """Fit ``C`` of a shallow network by (ridge) least squares."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    act = Activation(activation)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if data.inputs.shape[1] != A.shape[1]:
        raise ValueError(f"dataset input dimension {data.inputs.shape[1]} != {A.shape[1]}")
    Phi = act(data.inputs @ A.T + b)
    C = solve_ridge(Phi, data.outputs, ridge).T
    return ShallowNet(A, b, C, act, seed)


def train_hom(A, b, activation, dil, degree, data, ridge=DEFAULT_RIDGE, norm=None, seed=None):
    """Fit ``C`` of a homogeneous network on transformed features."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    if np.any(np.all(data.inputs == 0, axis=1)):
        raise DomainError("training inputs must be non-zero")
    probe = ShallowNet(A, b, np.zeros((data.outputs.shape[1], np.shape(A)[0])), activation, seed)
    hnet = HomNet(probe, dil, degree, norm)
    Phi = hnet.features(data.inputs)
    hnet.net = replace(probe, C=solve_ridge(Phi, data.outputs, ridge).T)
    return hnet


def homogenize(net, dil, degree, norm=None, region=None):
    """Wrap a trained shallow network into a homogeneous one, weights unchanged.

    ``region`` records the claimed training set (e.g. ``(r1, r2)`` of an
    annulus); containing the unit sphere in it is the caller's responsibility.
    """
    meta = {} if region is None else {"training_region": list(region)}
    return HomNet(net, dil, degree, norm, meta)


def eval_shallow(net, x):
    return net(x)


def eval_hom(hnet, x):
    return hnet(x)


def sample_annulus(rng, count, n, r1, r2):
    """Points uniform in ``{r1 <= |x| <= r2}`` (Euclidean) in R^n."""
    if r1 < 0 or r1 > r2:
        raise ValueError(f"invalid annulus [{r1}, {r2}]")
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = rng.uniform(size=count)
    r = (r1**n + t * (r2**n - r1**n)) ** (1.0 / n)
    return u * r[:, None]


def sup_error(f_true, model, r1, r2, samples=20000, seed=0, rng=None, n=None):
    """Monte-Carlo L-infinity error of ``model`` against ``f_true`` on an annulus.

    Points are uniform in the annulus (uniform direction, radius from the
    inverse CDF of the shell volume); the error at a point is the Euclidean
    norm of the output difference.
    """
    if r1 > r2:
        raise ValueError("r1 must not exceed r2")
    n = _input_dim(model) if n is None else n
    rng = np.random.default_rng(seed) if rng is None else rng
    X = sample_annulus(rng, samples, n, r1, r2)
    err = np.atleast_2d(np.asarray(f_true(X), dtype=float).reshape(samples, -1)
                        - np.asarray(model(X), dtype=float).reshape(samples, -1))
    return float(np.max(np.linalg.norm(err, axis=1)))


def _input_dim(model):
    if isinstance(model, ShallowNet):
        return model.n_inputs
    if isinstance(model, HomNet):
        return model.dilation.n
    n = getattr(model, "n_inputs", None)
    if n is None:
        raise TypeError("cannot infer the input dimension of the model")
    return int(n)


# -- model files ------------------------------------------------------------

def model_to_dict(model):
    """JSON-ready description of a shallow or canonical-norm homogeneous model."""
    hom = isinstance(model, HomNet)
    net = model.net if hom else model
    if hom and model.norm is not None:
        raise ValueError("models with a custom norm cannot be serialized")
    return {
        "type": "hom" if hom else "shallow",
        "activation": net.activation.value,
        "A": net.A.tolist(),
        "b": net.b.tolist(),
        "C": net.C.tolist(),
        "dilation": model.dilation.to_dict() if hom else None,
        "nu": model.degree if hom else None,
        "seed": net.seed,
        "meta": dict(model.meta) if hom else {},
    }


def model_from_dict(d):
    try:
        kind = d["type"]
        net = ShallowNet(d["A"], d["b"], d["C"], d.get("activation", "sigmoid"), d.get("seed"))
    except KeyError as exc:
        raise ValueError(f"model description lacks field {exc}") from None
    if kind == "shallow":
        return net
    if kind == "hom":
        return HomNet(net, Dilation.from_dict(d["dilation"]), d["nu"], meta=dict(d.get("meta") or {}))
    raise ValueError(f"unknown model type {kind!r}")
