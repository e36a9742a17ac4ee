"""Monomial bases and coefficient algebra for bivariate polynomial densities.

A filter's joint density is f(x, y) = X^T A X where X is the vector of
bivariate monomials up to half the target degree and A = B B^T + ridge * I
for a learnable symmetric B, so f is a nonnegative polynomial of even total
degree d. Everything downstream works on two equivalent representations:

- the quadratic form (B, and through it A), which carries the learnable
  parameters (the upper triangle of B, m(m+1)/2 of them), and
- the coefficient table a[i, j] of x^i y^j, which makes evaluation and the
  exact marginal integral over y in [-1, 1] trivial.

The maps between the two are linear and are expressed as constant matrices
per degree, so batched conversion (and its transpose for gradients) is a
single matmul.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import PolyNetError

DEGREES = (2, 4)


@dataclass(frozen=True)
class MonomialBasis:
    """Bivariate monomial basis of total degree <= d/2 with d in {2, 4}.

    For d = 2 the basis is [1, x, y] (m = 3) and for d = 4 it is
    [1, x, y, x^2, x y, y^2] (m = 6), giving m(m+1)/2 = 6 and 21 free
    coefficients respectively for a symmetric B.
    """

    degree: int
    exponents: np.ndarray = field(init=False, repr=False, compare=False)
    expand: np.ndarray = field(init=False, repr=False, compare=False)
    marginal_weights: np.ndarray = field(init=False, repr=False, compare=False)
    triu_rows: np.ndarray = field(init=False, repr=False, compare=False)
    triu_cols: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.degree not in DEGREES:
            raise PolyNetError(f"degree must be one of {DEGREES}, got {self.degree}")
        half = self.degree // 2
        exps = [
            (i, j)
            for total in range(half + 1)
            for i in range(total, -1, -1)
            for j in (total - i,)
        ]
        # ordering sanity: [1, x, y] and [1, x, y, x^2, x y, y^2]
        exponents = np.array(exps, dtype=np.int64)
        m = len(exponents)
        assert {2: 3, 4: 6}[self.degree] == m
        assert {2: 6, 4: 21}[self.degree] == m * (m + 1) // 2

        width = self.degree + 1
        expand = np.zeros((m * m, width * width))
        for p in range(m):
            for q in range(m):
                i = exponents[p, 0] + exponents[q, 0]
                j = exponents[p, 1] + exponents[q, 1]
                expand[p * m + q, i * width + j] = 1.0
        # integral of y^j over [-1, 1]: 2/(j+1) for even j, 0 for odd
        weights = np.array(
            [2.0 / (j + 1) if j % 2 == 0 else 0.0 for j in range(width)]
        )
        rows, cols = np.triu_indices(m)
        for arr in (exponents, expand, weights, rows, cols):
            arr.flags.writeable = False
        object.__setattr__(self, "exponents", exponents)
        object.__setattr__(self, "expand", expand)
        object.__setattr__(self, "marginal_weights", weights)
        object.__setattr__(self, "triu_rows", rows)
        object.__setattr__(self, "triu_cols", cols)

    @property
    def size(self) -> int:
        """Number of basis monomials m."""
        return len(self.exponents)

    @property
    def n_packed(self) -> int:
        """Free coefficients of a symmetric m x m matrix."""
        m = self.size
        return m * (m + 1) // 2

    # ---- packed symmetric parameterisation -------------------------------

    def unpack(self, theta: np.ndarray) -> np.ndarray:
        """Packed upper triangle (..., n_packed) -> symmetric B (..., m, m)."""
        theta = np.asarray(theta, dtype=np.float64)
        m = self.size
        out = np.zeros(theta.shape[:-1] + (m, m))
        out[..., self.triu_rows, self.triu_cols] = theta
        out[..., self.triu_cols, self.triu_rows] = theta
        return out

    def pack_grad(self, grad_b: np.ndarray) -> np.ndarray:
        """Gradient wrt B (..., m, m) -> gradient wrt packed theta.

        Off-diagonal packed entries drive two mirrored slots of B, so their
        gradients add; diagonal entries map one to one.
        """
        upper = grad_b[..., self.triu_rows, self.triu_cols]
        lower = grad_b[..., self.triu_cols, self.triu_rows]
        off = (self.triu_rows != self.triu_cols).astype(np.float64)
        return upper + off * lower

    def init_packed(self, rng: np.random.Generator, shape=()) -> np.ndarray:
        """B starts near sqrt(1/2) * I with small symmetric noise, giving a
        gently peaked, safely positive initial density."""
        theta = 0.01 * rng.standard_normal(tuple(shape) + (self.n_packed,))
        theta[..., self.triu_rows == self.triu_cols] += np.sqrt(0.5)
        return theta

    # ---- coefficient algebra ----------------------------------------------

    def joint_coeffs(self, b: np.ndarray, ridge: float) -> np.ndarray:
        """Coefficient table a (..., d+1, d+1) of f(x, y) = X^T (BB^T + eps I) X."""
        b = np.asarray(b, dtype=np.float64)
        m = self.size
        a_mat = b @ np.swapaxes(b, -1, -2)
        if ridge:
            a_mat = a_mat + ridge * np.eye(m)
        flat = a_mat.reshape(a_mat.shape[:-2] + (m * m,)) @ self.expand
        width = self.degree + 1
        return flat.reshape(flat.shape[:-1] + (width, width))

    def joint_coeffs_backward(self, grad_a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Chain a gradient wrt the coefficient table back to packed theta."""
        m = self.size
        flat = grad_a.reshape(grad_a.shape[:-2] + (-1,))
        grad_a_mat = (flat @ self.expand.T).reshape(flat.shape[:-1] + (m, m))
        sym = grad_a_mat + np.swapaxes(grad_a_mat, -1, -2)
        return self.pack_grad(sym @ b)

    def marginal_coeffs(self, a: np.ndarray) -> np.ndarray:
        """Exact coefficients b_i of f_x(x) = integral of f(x, y) dy over [-1, 1]."""
        return np.asarray(a, dtype=np.float64) @ self.marginal_weights


@lru_cache(maxsize=None)
def basis_for_degree(degree: int) -> MonomialBasis:
    return MonomialBasis(degree)
