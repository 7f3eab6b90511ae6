"""Cusp profiles phi: the complement cusp is {(x, y): x < 0, |y| <= phi(-x)}.

Everything downstream (eta, ell, the cell maps) is written in terms of a profile,
so the power cusp and the exact cardioid cusp share one implementation.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels


class Profile:
    """Base class; subclasses provide phi, dphi and u_cap."""

    u_cap: float = 1.0

    def phi(self, U):
        raise NotImplementedError

    def dphi(self, U):
        raise NotImplementedError

    def eta(self, U):
        """(U^2 + phi(U)^2)^(1/4): radius of the square root of (-U, phi(U))."""
        U = _nonneg(U)
        return (U * U + self.phi(U) ** 2) ** 0.25

    def eta_prime(self, U):
        U = np.asarray(U, dtype=float)
        if np.any(U <= 0):
            raise ValueError("eta_prime needs U > 0")
        p = self.phi(U)
        return (2 * U + 2 * p * self.dphi(U)) / (4 * (U * U + p * p) ** 0.75)

    def eta_inverse(self, r):
        # h(U) = U^2 + phi^2 is convex increasing, so Newton from U = r^2 decreases monotonically
        r = _nonneg(r)
        target = r ** 4
        u = r * r
        for _ in range(200):
            p = self.phi(u)
            g = u * u + p * p - target
            dg = 2 * u + 2 * p * self.dphi(u)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dg > 0, g / dg, 0.0)
            u = np.maximum(u - step, 0.0)
            if np.all(np.abs(step) <= 4e-16 * np.maximum(u, 1e-300)):
                break
        return u

    def half_angle(self, U):
        """arctan(phi(U)/U): the cusp's opening seen from the origin."""
        U = np.asarray(U, dtype=float)
        return np.arctan2(self.phi(U), U)

    def ell(self, U):
        """Angular width pi + arctan(phi/U) of the cell at radius eta(U)."""
        return np.pi + self.half_angle(U)

    def dell_dr(self, U):
        """d ell / d r at r = eta(U)."""
        U = np.asarray(U, dtype=float)
        p = self.phi(U)
        return (self.dphi(U) * U - p) / (U * U + p * p) / self.eta_prime(U)

    def descriptor(self):
        raise NotImplementedError


def _nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(~np.isfinite(x)):
        raise ValueError("argument must be finite and non-negative")
    return x


@dataclass(frozen=True)
class PowerProfile(Profile):
    s: float
    u_cap: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s <= 1:
            raise ValueError(f"cusp degree must satisfy s > 1, got {self.s}")

    def phi(self, U):
        return np.asarray(U, dtype=float) ** self.s

    def dphi(self, U):
        return self.s * np.asarray(U, dtype=float) ** (self.s - 1)

    def eta(self, U):
        U = _nonneg(U)
        return np.sqrt(U) * (1 + U ** (2 * (self.s - 1))) ** 0.25

    def eta_prime(self, U):
        U = np.asarray(U, dtype=float)
        if np.any(U <= 0):
            raise ValueError("eta_prime needs U > 0")
        q = U ** (2 * (self.s - 1))
        return (1 + q) ** 0.25 / (2 * np.sqrt(U)) * (1 + (self.s - 1) * q / (1 + q))

    def eta_inverse(self, r):
        return _kernels.eta_inv_power(self.s, _nonneg(r))

    def half_angle(self, U):
        return np.arctan(np.asarray(U, dtype=float) ** (self.s - 1))

    def descriptor(self):
        return {"kind": "power", "s": self.s}


@dataclass(frozen=True)
class CardioidProfile(Profile):
    """phi(U) = sqrt(d(-U)) with the exact cardioid cusp width d; s = 3/2 behaviour."""

    u_cap: float = 0.25
    s: float = 1.5

    @staticmethod
    def _den(U):
        return 2 - U * U - 2 * U + 2 * np.sqrt(1 - 2 * U)

    def _ratio(self, U):
        # d(-U) = U^3 * ratio(U)
        return (4 + U) / self._den(U)

    def phi(self, U):
        U = np.asarray(U, dtype=float)
        return U ** 1.5 * np.sqrt(self._ratio(U))

    def dphi(self, U):
        U = np.asarray(U, dtype=float)
        den = self._den(U)
        dden = -2 * U - 2 - 2 / np.sqrt(1 - 2 * U)
        rat = (4 + U) / den
        drat = (den - (4 + U) * dden) / den ** 2
        sq = np.sqrt(rat)
        return 1.5 * np.sqrt(U) * sq + U ** 1.5 * drat / (2 * sq)

    def descriptor(self):
        return {"kind": "cardioid"}


def make_profile(s=None, cardioid=False):
    return CardioidProfile() if cardioid else PowerProfile(float(s))
