"""Angular-velocity dynamics of a rigid body.

``omega_dot = J^-1 (-omega x J omega + tau)`` is homogeneous of degree 2 for
the dilation ``diag(e^s I_3, e^{2s} I_3)`` acting on ``(omega, tau)``.
"""

from dataclasses import dataclass

import numpy as np

from ..dilation import Dilation

# inertia matrix of the identification example
EXAMPLE_INERTIA = np.array([[1.0, 0.3, 0.1],
                            [0.3, 1.2, 0.2],
                            [0.1, 0.2, 0.8]])

GENERATOR = np.diag([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
DEGREE = 2.0


def rigid_body_dilation():
    return Dilation(GENERATOR)


@dataclass(eq=False)
class RigidBody:
    J: np.ndarray

    n_inputs = 6

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        if self.J.shape != (3, 3):
            raise ValueError("inertia matrix must be 3x3")
        if not np.allclose(self.J, self.J.T, rtol=0, atol=1e-12):
            raise ValueError("inertia matrix must be symmetric")
        if np.linalg.eigvalsh(self.J)[0] <= 0:
            raise ValueError("inertia matrix must be positive definite")
        self._J_inv = np.linalg.inv(self.J)

    def rhs(self, omega, tau):
        omega = np.asarray(omega, dtype=float)
        tau = np.asarray(tau, dtype=float)
        return (-np.cross(omega, omega @ self.J.T) + tau) @ self._J_inv.T

    def __call__(self, x):
        """Right-hand side as a map R^6 -> R^3 of ``x = (omega, tau)``."""
        x = np.asarray(x, dtype=float)
        return self.rhs(x[..., :3], x[..., 3:])


def rigid_body_rhs(body, omega, tau):
    return body.rhs(omega, tau)
