"""Batched 2x2 matrix helpers; matrices are arrays of shape (..., 2, 2)."""
from dataclasses import dataclass

import numpy as np

from ._kernels import sv2


def mat(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, d)))
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def det(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def inv(m):
    d = det(m)
    return mat(m[..., 1, 1] / d, -m[..., 0, 1] / d, -m[..., 1, 0] / d, m[..., 0, 0] / d)


def singular_values(m):
    return sv2(m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1])


def opnorm(m):
    return singular_values(m)[0]


@dataclass(frozen=True)
class JacobianMatrix:
    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def from_array(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def array(self):
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def singular_values(self):
        smax, smin = sv2(self.a11, self.a12, self.a21, self.a22)
        return float(smax), float(smin)

    @property
    def opnorm(self):
        return self.singular_values[0]

    @property
    def K(self):
        """|A|^2 / det A when det > 0, else 1 (degenerate convention)."""
        d = self.det
        return self.opnorm ** 2 / d if d > 0 else 1.0


def distortion(m):
    """Batched K = |A|^2/det (det > 0), 1 elsewhere."""
    d = det(m)
    n = opnorm(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, n * n / d, 1.0)
