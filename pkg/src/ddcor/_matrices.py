"""
Dense kernel matrices and their bilinear forms.

DC, HSIC and PCor share the shape ``scale * sum_kl L_kl R_kl`` where ``L``
is a centred (or U-transformed) kernel matrix of one variable and ``R`` the
raw kernel matrix of the other.  Permuting the second variable permutes the
rows and columns of ``R`` only, so permutation statistics reduce to gathers
and one matrix product.  Everything here works on stacks ``(..., n, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import (
    BLOCK_ELEMENTS,
    Method,
    angle_kernel,
    distance_kernel,
    gaussian_kernel,
    is_constant,
)


def double_center(a: np.ndarray) -> np.ndarray:
    row = a.mean(axis=-1, keepdims=True)
    col = a.mean(axis=-2, keepdims=True)
    grand = a.mean(axis=(-2, -1), keepdims=True)
    return a - row - col + grand


def pcov_transform(a: np.ndarray) -> np.ndarray:
    """Matrix ``T`` with ``sum_kl T_kl b_kl`` equal to the PCov U-statistic.

    ``a`` and ``b`` must have zero diagonals; ``n >= 4``.
    """
    n = a.shape[-1]
    n2 = n * (n - 1)
    n3 = n2 * (n - 2)
    n4 = n3 * (n - 3)
    c1 = 1.0 / n2 + 2.0 / n3 + 2.0 / n4
    c2 = 2.0 / n3 + 4.0 / n4
    rows = a.sum(axis=-1)
    total = rows.sum(axis=-1)[..., None, None]
    t = c1 * a - 0.5 * c2 * (rows[..., :, None] + rows[..., None, :]) + total / n4
    idx = np.arange(n)
    t[..., idx, idx] = 0.0
    return t


def kernel_matrix(method: Method, z: np.ndarray, bandwidth: float, sigma_sq: float) -> np.ndarray:
    """Full ``n x n`` kernel matrix of the rows of ``z`` for ``method``."""
    if method is Method.DC:
        return distance_kernel(z, z)
    if method is Method.HSIC:
        return gaussian_kernel(bandwidth)(z, z)
    if method is Method.PCOR:
        a = angle_kernel(sigma_sq)(z, z)
        np.fill_diagonal(a, 0.0)
        if is_constant(z):
            a[:] = 0.0
        return a
    raise ValueError(f"{method} has no kernel-matrix form")


def column_kernel_matrices(
    method: Method, cols: np.ndarray, bandwidth: float, sigma_sq: float
) -> np.ndarray:
    """Kernel matrices of many univariate variables; ``cols`` has shape (c, n)."""
    diff = cols[:, :, None] - cols[:, None, :]
    if method is Method.DC:
        return np.abs(diff)
    if method is Method.HSIC:
        return np.exp(-(diff**2) / (2.0 * bandwidth * bandwidth))
    if method is Method.PCOR:
        norm = np.sqrt(sigma_sq + cols**2)
        cos = (sigma_sq + cols[:, :, None] * cols[:, None, :]) / norm[:, :, None] / norm[:, None, :]
        a = np.arccos(np.clip(cos, -1.0, 1.0))
        idx = np.arange(cols.shape[1])
        a[:, idx, idx] = 0.0
        a[np.all(cols == cols[:, :1], axis=1)] = 0.0
        return a
    raise ValueError(f"{method} has no kernel-matrix form")


def left_operand(method: Method, a: np.ndarray) -> np.ndarray:
    if method is Method.PCOR:
        return pcov_transform(a)
    return double_center(a)


def _frobenius(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", u, v)


@dataclass
class BilinearForm:
    """Statistic ``scale * sum_kl left_kl right_kl`` for one or many ``left`` matrices."""

    left: np.ndarray
    right: np.ndarray
    scale: np.ndarray

    def value(self) -> np.ndarray:
        return self.scale * _frobenius(self.left, self.right)


def _self_norm(method: Method, left: np.ndarray, a: np.ndarray, n: int) -> np.ndarray:
    norm = _frobenius(left, a)
    if method is Method.DC:
        norm = norm / n**2
    return norm


def bilinear_form(method: Method, a: np.ndarray, b: np.ndarray) -> BilinearForm:
    """Bilinear form of ``method`` given kernel matrices ``a`` (possibly stacked) and ``b``."""
    n = b.shape[-1]
    left = left_operand(method, a)
    if method is Method.HSIC:
        scale = np.full(left.shape[:-2], 1.0 / n**2)
        return BilinearForm(left, b, scale)
    norm_a = np.atleast_1d(_self_norm(method, left, a, n))
    norm_b = float(_self_norm(method, left_operand(method, b), b, n))
    scale = np.zeros_like(norm_a)
    ok = (norm_a > 0) & (norm_b > 0)
    scale[ok] = 1.0 / np.sqrt(norm_a[ok] * norm_b)
    if method is Method.DC:
        scale = scale / n**2
    return BilinearForm(left, b, scale.reshape(left.shape[:-2]))


def permutation_chunk(n: int) -> int:
    return max(1, BLOCK_ELEMENTS // (n * n))


def permuted_values(form: BilinearForm, perms: np.ndarray) -> np.ndarray:
    """Statistic for each permutation of the ``right`` variable.

    Returns shape ``(B,)`` for a single ``left`` or ``(B, c)`` for a stack.
    """
    n = form.right.shape[-1]
    stacked = form.left.ndim == 3
    lefts = form.left.reshape(-1, n * n)
    out = np.empty((perms.shape[0], lefts.shape[0]))
    step = permutation_chunk(n)
    for start in range(0, perms.shape[0], step):
        chunk = perms[start:start + step]
        gathered = form.right[chunk[:, :, None], chunk[:, None, :]].reshape(chunk.shape[0], -1)
        out[start:start + step] = gathered @ lefts.T
    out *= np.reshape(form.scale, (1, -1))
    return out if stacked else out[:, 0]
