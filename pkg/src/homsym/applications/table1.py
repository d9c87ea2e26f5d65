"""Extrapolation table for the rigid-body model.

A conventional network is trained on a thin annulus around the unit sphere.
Three homogeneous networks reuse its weights: one with the known dilation and
degree, one with an estimated degree, and one with degree 1 and an identified
diagonal generator.  Each model's sup error is reported on concentric shells.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..dilation import Dilation
from ..networks import LabeledDataset, homogenize, random_features, sample_annulus, sup_error, \
    train_output_layer
from ..rng import stream, subseed
from ..symmetry import KDeltaSampler, estimate_degree, identify_generator
from .rigid_body import DEGREE, EXAMPLE_INERTIA, RigidBody, rigid_body_dilation

TRAIN_REGION = (0.95, 1.05)
SHELLS = (
    ("-4", 0.0, 0.25), ("-3", 0.25, 0.5), ("-2", 0.5, 0.75), ("-1", 0.75, 1.0),
    ("0", 0.95, 1.05),
    ("1", 1.0, 1.25), ("2", 1.25, 1.5), ("3", 1.5, 1.75), ("4", 1.75, 2.0),
)
COLUMNS = ("ann", "hann_nu2", "hann_nu_eps", "hann_G_eps")

# identification settings used inside the harness
DEGREE_SAMPLES = 2000
DEGREE_DELTA = 0.01
DEGREE_LN_BAND = 0.01
GENERATOR_REGION = (0.98, 1.02)
GENERATOR_SAMPLES = 4000
GENERATOR_DELTA = 0.01


@dataclass
class Table1Report:
    seed: int
    nu_eps: float
    G_eps: np.ndarray
    errors: dict = field(default_factory=dict)   # shell label -> {column: error}

    def column(self, name):
        return np.array([self.errors[label][name] for label, _, _ in SHELLS])

    def rows(self):
        yield ("shell", "r_min", "r_max") + COLUMNS
        for label, r1, r2 in SHELLS:
            yield (label, repr(r1), repr(r2)) + tuple(repr(self.errors[label][c]) for c in COLUMNS)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.rows())


def table1_harness(seed=0, N=500, M=20000, shells=SHELLS, body=None):
    body = RigidBody(EXAMPLE_INERTIA) if body is None else body
    dil = rigid_body_dilation()

    X = sample_annulus(stream(seed, "table1.train"), M, 6, *TRAIN_REGION)
    A, b = random_features(6, N, stream(seed, "table1.features"))
    ann = train_output_layer(A, b, "sigmoid", LabeledDataset(X, body(X)), seed=seed)

    sampler = KDeltaSampler(dil, ann, DEGREE_DELTA, DEGREE_LN_BAND, TRAIN_REGION,
                            subseed(seed, "table1.degree"))
    nu_eps = estimate_degree(ann, dil, sampler, DEGREE_SAMPLES).nu_hat
    gen = identify_generator(ann, GENERATOR_REGION, 1.0, "diagonal", M=GENERATOR_SAMPLES,
                             delta=GENERATOR_DELTA, seed=subseed(seed, "table1.generator"))

    models = {
        "ann": ann,
        "hann_nu2": homogenize(ann, dil, DEGREE, region=TRAIN_REGION),
        "hann_nu_eps": homogenize(ann, dil, nu_eps, region=TRAIN_REGION),
        "hann_G_eps": homogenize(ann, Dilation(gen.G_hat), 1.0, region=TRAIN_REGION),
    }
    errors = {}
    for label, r1, r2 in shells:
        # every model sees the same points on a shell
        errors[label] = {name: sup_error(body, model, r1, r2, samples=M, n=6,
                                         rng=stream(seed, f"table1.shell{label}"))
                         for name, model in models.items()}
    return Table1Report(seed, float(nu_eps), gen.G_hat, errors)
