"""Convex terms with exact value / conjugate / prox oracles.

Two families are supported: indicators of projectable convex sets (halfspace,
hyperplane, box, Euclidean ball, affine subspace) and two smooth-or-simple
regularizers (weighted l1 norm, quadratic distance).  Every term is proper,
closed and convex with a single-valued prox in closed form, which is what the
sweep engine relies on for its exact solve tiers.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

# Membership slack for indicator evaluation, Euclidean distance to the set.
FEAS_TOL = 1e-9
# Conjugate-domain membership test, relative residual.
DOM_TOL = 1e-8

_INF = float("inf")


class DimensionMismatch(ValueError):
    """Input vector does not match the term's ambient dimension."""


def _vec(x, d, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionMismatch(f"{name} has shape {x.shape}, expected ({d},)")
    return x


# ---------------------------------------------------------------------------
# projectable sets
# ---------------------------------------------------------------------------

class Halfspace:
    """{x : <a, x> <= b} with a nonzero."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float).ravel()
        self.dim = self.a.size
        nrm2 = float(self.a @ self.a)
        if nrm2 == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        self.b = float(b)
        self._nrm2 = nrm2

    def project(self, u):
        u = _vec(u, self.dim, "u")
        excess = (float(self.a @ u) - self.b) / self._nrm2
        if excess <= 0.0:
            return u.copy()
        return u - excess * self.a

    def support(self, z):
        # dom sigma = nonnegative ray through a
        z = _vec(z, self.dim, "z")
        s = float(self.a @ z) / self._nrm2
        resid = float(np.linalg.norm(z - s * self.a))
        if resid > DOM_TOL * max(1.0, float(np.linalg.norm(z))) or s < -DOM_TOL:
            return _INF
        return self.b * s


class Hyperplane:
    """{x : <a, x> = b} with a nonzero."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float).ravel()
        self.dim = self.a.size
        nrm2 = float(self.a @ self.a)
        if nrm2 == 0.0:
            raise ValueError("hyperplane normal must be nonzero")
        self.b = float(b)
        self._nrm2 = nrm2

    def project(self, u):
        u = _vec(u, self.dim, "u")
        return u - ((float(self.a @ u) - self.b) / self._nrm2) * self.a

    def support(self, z):
        # dom sigma = the line through a, any sign
        z = _vec(z, self.dim, "z")
        s = float(self.a @ z) / self._nrm2
        resid = float(np.linalg.norm(z - s * self.a))
        if resid > DOM_TOL * max(1.0, float(np.linalg.norm(z))):
            return _INF
        return self.b * s


class Box:
    """{x : lo <= x <= hi} componentwise, bounds finite."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float).ravel()
        self.hi = np.asarray(hi, dtype=float).ravel()
        if self.lo.shape != self.hi.shape:
            raise DimensionMismatch("box bounds have different shapes")
        if not (np.isfinite(self.lo).all() and np.isfinite(self.hi).all()):
            raise ValueError("box bounds must be finite")
        if np.any(self.lo > self.hi):
            raise ValueError("box has lo > hi in some coordinate")
        self.dim = self.lo.size

    def project(self, u):
        u = _vec(u, self.dim, "u")
        return np.clip(u, self.lo, self.hi)

    def support(self, z):
        z = _vec(z, self.dim, "z")
        return float(np.sum(np.where(z > 0.0, z * self.hi, z * self.lo)))


class L2Ball:
    """{x : ||x - center|| <= radius}."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)
        if self.radius < 0.0:
            raise ValueError("ball radius must be nonnegative")
        self.dim = self.center.size

    def project(self, u):
        u = _vec(u, self.dim, "u")
        diff = u - self.center
        nrm = float(np.linalg.norm(diff))
        if nrm <= self.radius:
            return u.copy()
        return self.center + (self.radius / nrm) * diff

    def support(self, z):
        z = _vec(z, self.dim, "z")
        return float(z @ self.center) + self.radius * float(np.linalg.norm(z))


class AffineSubspace:
    """{x : A x = c} with A full row rank (k x d, k <= d).

    The Gram matrix A A^T is Cholesky-factored once so repeated projections
    and support evaluations cost O(k d + k^2).
    """

    def __init__(self, matrix, rhs):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2:
            raise ValueError("affine constraint matrix must be 2-d")
        c = np.asarray(rhs, dtype=float).ravel()
        if c.size != A.shape[0]:
            raise DimensionMismatch("affine rhs length does not match row count")
        if np.linalg.matrix_rank(A, tol=1e-10) < A.shape[0]:
            raise ValueError("affine constraint matrix is row rank deficient")
        self.matrix = A
        self.rhs = c
        self.dim = A.shape[1]
        self._chol = cho_factor(A @ A.T)

    def project(self, u):
        u = _vec(u, self.dim, "u")
        y = cho_solve(self._chol, self.matrix @ u - self.rhs)
        return u - self.matrix.T @ y

    def support(self, z):
        # dom sigma = range(A^T); value <y, rhs> for z = A^T y
        z = _vec(z, self.dim, "z")
        y = cho_solve(self._chol, self.matrix @ z)
        resid = float(np.linalg.norm(z - self.matrix.T @ y))
        if resid > DOM_TOL * max(1.0, float(np.linalg.norm(z))):
            return _INF
        return float(y @ self.rhs)


# ---------------------------------------------------------------------------
# terms
# ---------------------------------------------------------------------------

class Indicator:
    """Indicator of a projectable set; prox is the projection for every step."""

    def __init__(self, set_):
        self.set = set_
        self.dim = set_.dim

    def value(self, x):
        x = _vec(x, self.dim)
        if float(np.linalg.norm(x - self.set.project(x))) <= FEAS_TOL:
            return 0.0
        return _INF

    def prox(self, u, t=1.0):
        if t <= 0.0:
            raise ValueError("prox step must be positive")
        return self.set.project(u)

    def conjugate(self, z):
        return self.set.support(z)


class L1Norm:
    """weight * ||x||_1; prox is soft thresholding."""

    def __init__(self, dim, weight=1.0):
        self.dim = int(dim)
        self.weight = float(weight)
        if self.weight <= 0.0:
            raise ValueError("l1 weight must be positive")

    def value(self, x):
        x = _vec(x, self.dim)
        return self.weight * float(np.abs(x).sum())

    def prox(self, u, t=1.0):
        if t <= 0.0:
            raise ValueError("prox step must be positive")
        u = _vec(u, self.dim, "u")
        return np.sign(u) * np.maximum(np.abs(u) - t * self.weight, 0.0)

    def conjugate(self, z):
        # indicator of the weight-radius sup-norm ball
        z = _vec(z, self.dim, "z")
        if float(np.abs(z).max()) <= self.weight + DOM_TOL * max(1.0, self.weight):
            return 0.0
        return _INF


class Quadratic:
    """(weight / 2) * ||x - center||^2."""

    def __init__(self, center, weight=1.0):
        self.center = np.asarray(center, dtype=float).ravel()
        self.weight = float(weight)
        if self.weight <= 0.0:
            raise ValueError("quadratic weight must be positive")
        self.dim = self.center.size

    def value(self, x):
        x = _vec(x, self.dim)
        d = x - self.center
        return 0.5 * self.weight * float(d @ d)

    def prox(self, u, t=1.0):
        if t <= 0.0:
            raise ValueError("prox step must be positive")
        u = _vec(u, self.dim, "u")
        tw = t * self.weight
        return (u + tw * self.center) / (1.0 + tw)

    def conjugate(self, z):
        z = _vec(z, self.dim, "z")
        return float(z @ self.center) + float(z @ z) / (2.0 * self.weight)


def moreau_dual(term, u):
    """Prox of the conjugate at u via the Moreau identity, u - prox(term, u, 1)."""
    u = np.asarray(u, dtype=float)
    return u - term.prox(u, 1.0)
