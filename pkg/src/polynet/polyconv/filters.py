"""Single polynomial-density filter: joint, marginal, conditional, patch op."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import PolyNetError
from .basis import MonomialBasis, basis_for_degree


class PolyFilter:
    """One learned conditional density f(y | x) on [-1, 1]^2.

    The joint f(x, y) = X^T (B B^T + ridge I) X is a nonnegative polynomial;
    the conditional divides by the exact marginal f_x(x). This class is the
    readable scalar/broadcast reference used by tests and by the squeezed
    layer's per-filter path; the convolution layers inline the same algebra
    in batched form.
    """

    def __init__(self, theta: np.ndarray, degree: int = 2, ridge: float = 0.0):
        self.basis: MonomialBasis = basis_for_degree(degree)
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.basis.n_packed,):
            raise PolyNetError(
                f"expected {self.basis.n_packed} packed coefficients for "
                f"degree {degree}, got shape {theta.shape}"
            )
        self.theta = theta
        self.ridge = float(ridge)
        b = self.basis.unpack(theta)
        self.coeffs = self.basis.joint_coeffs(b, self.ridge)
        self.marginal_coeffs = self.basis.marginal_coeffs(self.coeffs)

    @classmethod
    def from_matrix(cls, b: np.ndarray, ridge: float = 0.0) -> "PolyFilter":
        """Build from a full symmetric B, packing its upper triangle."""
        b = np.asarray(b, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise PolyNetError(f"B must be square, got shape {b.shape}")
        if not np.array_equal(b, b.T):
            raise PolyNetError("B must be symmetric")
        degree = {3: 2, 6: 4}.get(b.shape[0])
        if degree is None:
            raise PolyNetError(f"B must be 3x3 or 6x6, got {b.shape[0]}x{b.shape[0]}")
        basis = basis_for_degree(degree)
        return cls(b[basis.triu_rows, basis.triu_cols], degree=degree, ridge=ridge)

    def joint(self, x, y) -> np.ndarray:
        """f(x, y), broadcast over array inputs."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return P.polyval2d(x, y, self.coeffs)

    def marginal(self, x) -> np.ndarray:
        """f_x(x) = integral of f(x, y) dy over y in [-1, 1], evaluated exactly."""
        return P.polyval(np.asarray(x, float), self.marginal_coeffs)

    def conditional(self, x, y) -> np.ndarray:
        """f(y | x) = f(x, y) / f_x(x)."""
        return self.joint(x, y) / self.marginal(x)

    def patch_op(self, x_center, y_samples) -> float:
        """Average of y * f(y | x_center) over the given patch samples.

        The caller supplies the full sample list (by convention the center
        value first, then its ring); the operator itself is agnostic to the
        ordering and simply averages.
        """
        y = np.asarray(y_samples, dtype=np.float64)
        if y.ndim != 1 or y.size == 0:
            raise PolyNetError("patch_op needs a nonempty 1-d sample array")
        return float(np.mean(y * self.conditional(x_center, y)))
