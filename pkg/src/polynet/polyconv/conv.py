"""Graph convolution built from polynomial-density filters.

Each filter reads the center vertex's feature x, forms the conditional
density f(y | x) over neighbor features, and responds with the patch average
of y * f(y | x). Because f is a polynomial, the sum over a patch factors
through power sums of the member features:

    sum_u y_u f(x, y_u) = sum_ij a_ij x^i sum_u y_u^(j+1)

so one pass of ``np.add.reduceat`` over the patch table gives every vertex's
response, and the per-channel work is a few dense contractions with no
Python-level loop over vertices.

Two layer variants share this kernel. The unsqueezed variant learns one
filter per (input, output) channel pair and sums input-channel responses.
The squeezed variant learns one filter per input channel and mixes the
responses with a dense matrix plus bias, trading filter capacity for far
fewer parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PolyNetError, ShapeMismatchError
from .basis import MonomialBasis, basis_for_degree

_EXPECTED_PACKED = {2: 6, 4: 21}


@dataclass(frozen=True)
class ConvLayerSpec:
    """Static shape of one convolution layer.

    ``squeezed`` selects the per-input-channel filter bank followed by a
    dense channel mix; otherwise every (input, output) pair gets its own
    filter. ``ridge`` is added to the filter quadratic form's diagonal so
    densities stay strictly positive for any real feature value.
    """

    in_channels: int
    out_channels: int
    degree: int = 2
    squeezed: bool = False
    ridge: float = 1e-6

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise PolyNetError(
                f"channel counts must be positive, got "
                f"{self.in_channels} -> {self.out_channels}"
            )
        if self.ridge < 0.0:
            raise PolyNetError(f"ridge must be nonnegative, got {self.ridge}")
        basis = basis_for_degree(self.degree)
        assert basis.n_packed == _EXPECTED_PACKED[self.degree]

    @property
    def basis(self) -> MonomialBasis:
        return basis_for_degree(self.degree)

    @property
    def param_count(self) -> int:
        npack = self.basis.n_packed
        c, cp = self.in_channels, self.out_channels
        if self.squeezed:
            return c * npack + c * cp + cp
        return c * cp * npack

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Flat parameter vector: filters near the identity density, mix
        weights Glorot-normal, bias zero."""
        c, cp = self.in_channels, self.out_channels
        if not self.squeezed:
            return self.basis.init_packed(rng, (c, cp)).ravel()
        theta = self.basis.init_packed(rng, (c,))
        std = np.sqrt(2.0 / (c + cp))
        mix = rng.normal(0.0, std, size=(c, cp))
        return np.concatenate([theta.ravel(), mix.ravel(), np.zeros(cp)])

    def split_params(self, params: np.ndarray):
        """Flat vector -> (theta, mix, bias) views; mix and bias are None
        for the unsqueezed variant."""
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.param_count,):
            raise ShapeMismatchError(
                f"shape mismatch: layer expects {self.param_count} "
                f"parameters, got {params.shape}"
            )
        npack = self.basis.n_packed
        c, cp = self.in_channels, self.out_channels
        if not self.squeezed:
            return params.reshape(c, cp, npack), None, None
        n_theta = c * npack
        theta = params[:n_theta].reshape(c, npack)
        mix = params[n_theta : n_theta + c * cp].reshape(c, cp)
        bias = params[n_theta + c * cp :]
        return theta, mix, bias


def _check_patches(n_vertices, offsets, indices):
    offsets = np.asarray(offsets, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    if offsets.ndim != 1 or offsets.size != n_vertices + 1:
        raise ShapeMismatchError(
            f"shape mismatch: expected {n_vertices + 1} patch offsets, "
            f"got {offsets.shape}"
        )
    if offsets[0] != 0 or offsets[-1] != indices.size:
        raise PolyNetError("patch offsets do not span the index table")
    if np.any(np.diff(offsets) < 1):
        raise PolyNetError("every patch needs at least one member")
    if indices.size and (indices.min() < 0 or indices.max() >= n_vertices):
        raise PolyNetError("patch index out of range")
    return offsets, indices


# cap on the (V, channel block, O) work arrays so wide layers on fine
# meshes stay within a few dozen MB
_BLOCK_FLOATS = 1 << 22


def _channel_blocks(n_channels, n_vertices, n_out):
    block = max(1, _BLOCK_FLOATS // max(1, n_vertices * n_out))
    for lo in range(0, n_channels, block):
        yield lo, min(lo + block, n_channels)


def _powers(feats, d1):
    """Power table x^0..x^d1 over the last axis, (V, B) -> (V, B, d1 + 1)."""
    pw = np.empty(feats.shape + (d1 + 1,))
    pw[..., 0] = 1.0
    for j in range(1, d1 + 1):
        pw[..., j] = pw[..., j - 1] * feats
    return pw


def _bank_forward(a, b_marg, feats, offsets, indices, sizes):
    """Responses of per-channel filter banks.

    a: (B, O, d+1, d+1) joint coefficient tables, b_marg: (B, O, d+1)
    marginal coefficients, feats: (V, B) input channels. Returns (V, B, O).
    """
    d1 = a.shape[-1]
    pw = _powers(feats, d1)
    power_sums = np.add.reduceat(pw[indices], offsets[:-1], axis=0)
    xp = pw[..., :d1]
    num = np.einsum("vbi,boij,vbj->vbo", xp, a, power_sums[..., 1:], optimize=True)
    marg = np.einsum("vbi,boi->vbo", xp, b_marg, optimize=True)
    return num / (sizes[:, None, None] * marg)


def _bank_backward(a, b_marg, w_marg, feats, offsets, indices, owner, sizes, grad_out):
    """Gradients of the bank responses wrt the coefficient tables and the
    feature channels.

    grad_out broadcasts against (V, B, O): unsqueezed layers pass (V, 1, O)
    because every bank feeds the same summed output, squeezed ones (V, B, 1).
    Returns (grad_a (B, O, d+1, d+1), grad_feats (V, B)).
    """
    d1 = a.shape[-1]
    pw = _powers(feats, d1)
    power_sums = np.add.reduceat(pw[indices], offsets[:-1], axis=0)
    xp = pw[..., :d1]
    s1 = power_sums[..., 1:]
    num = np.einsum("vbi,boij,vbj->vbo", xp, a, s1, optimize=True)
    marg = np.einsum("vbi,boi->vbo", xp, b_marg, optimize=True)

    r = grad_out / (sizes[:, None, None] * marg)
    s = r * num / marg

    grad_a = np.einsum("vbo,vbi,vbj->boij", r, xp, s1, optimize=True)
    grad_a -= np.einsum("vbo,vbi->boi", s, xp, optimize=True)[..., None] * w_marg

    # center role: x appears directly in the numerator and the marginal
    dxp = np.zeros_like(xp)
    dxp[..., 1:] = xp[..., :-1] * np.arange(1, d1)
    center = np.einsum("vbi,boij,vbj->vbo", dxp, a, s1, optimize=True)
    grad_feats = (r * center).sum(axis=2) - np.einsum("vbo,boi,vbi->vb", s, b_marg, dxp, optimize=True)

    # member role: the same features enter every patch that contains them
    # through the power sums; scatter each patch entry's contribution back
    q = np.einsum("vbo,boij,vbi->vbj", r, a, xp, optimize=True) * np.arange(1, d1 + 1)
    np.add.at(
        grad_feats,
        indices,
        np.einsum("ebj,ebj->eb", q[owner], xp[indices], optimize=True),
    )
    return grad_a, grad_feats


def conv_forward(spec, params, feats, patch_offsets, patch_indices):
    """Apply the layer. feats is (V, in_channels); returns ((V, out_channels), cache).

    The cache holds everything ``conv_backward`` needs; intermediate power
    sums are recomputed there rather than stored, keeping memory linear in
    the feature table.
    """
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != spec.in_channels:
        raise ShapeMismatchError(
            f"shape mismatch: expected features (V, {spec.in_channels}), "
            f"got {feats.shape}"
        )
    n = feats.shape[0]
    offsets, indices = _check_patches(n, patch_offsets, patch_indices)
    theta, mix, bias = spec.split_params(params)
    basis = spec.basis

    b_sym = basis.unpack(theta)
    a = basis.joint_coeffs(b_sym, spec.ridge)
    b_marg = basis.marginal_coeffs(a)
    sizes = np.diff(offsets).astype(np.float64)

    if spec.squeezed:
        # one filter per channel, reading itself: bank axis carries C, O=1
        responses = _bank_forward(
            a[:, None], b_marg[:, None], feats, offsets, indices, sizes
        )[..., 0]
        out = responses @ mix + bias
    else:
        responses = None
        out = np.zeros((n, spec.out_channels))
        for lo, hi in _channel_blocks(spec.in_channels, n, spec.out_channels):
            out += _bank_forward(
                a[lo:hi], b_marg[lo:hi], feats[:, lo:hi], offsets, indices, sizes
            ).sum(axis=1)
    cache = (feats, offsets, indices, sizes, theta, mix, b_sym, a, b_marg, responses)
    return out, cache


def conv_backward(spec, cache, grad_out):
    """Gradients wrt the flat parameter vector and the input features."""
    feats, offsets, indices, sizes, theta, mix, b_sym, a, b_marg, responses = cache
    grad_out = np.asarray(grad_out, dtype=np.float64)
    n = feats.shape[0]
    if grad_out.shape != (n, spec.out_channels):
        raise ShapeMismatchError(
            f"shape mismatch: expected upstream gradient "
            f"{(n, spec.out_channels)}, got {grad_out.shape}"
        )
    basis = spec.basis
    w_marg = basis.marginal_weights
    owner = np.repeat(np.arange(n), np.diff(offsets))

    grad_params = np.zeros(spec.param_count)
    g_theta, g_mix, g_bias = spec.split_params(grad_params)
    grad_feats = np.empty_like(feats)

    if spec.squeezed:
        g_mix[...] = responses.T @ grad_out
        g_bias[...] = grad_out.sum(axis=0)
        grad_resp = grad_out @ mix.T
        grad_a, gx = _bank_backward(
            a[:, None],
            b_marg[:, None],
            w_marg,
            feats,
            offsets,
            indices,
            owner,
            sizes,
            grad_resp[..., None],
        )
        g_theta[...] = basis.joint_coeffs_backward(grad_a[:, 0], b_sym)
        grad_feats[...] = gx
    else:
        for lo, hi in _channel_blocks(spec.in_channels, n, spec.out_channels):
            grad_a, gx = _bank_backward(
                a[lo:hi], b_marg[lo:hi], w_marg, feats[:, lo:hi],
                offsets, indices, owner, sizes, grad_out[:, None, :],
            )
            g_theta[lo:hi] = basis.joint_coeffs_backward(grad_a, b_sym[lo:hi])
            grad_feats[:, lo:hi] = gx
    return grad_params, grad_feats
