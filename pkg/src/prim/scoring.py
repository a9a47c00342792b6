"""Distance-specific hyperplane projection and symmetric bilinear scores."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, div, matmul, mul, reshape, sqrt, sub, take, transpose, tsum


class DegenerateNormalError(ValueError):
    pass


def unit_normals(hyperplanes: Tensor) -> Tensor:
    """Row-normalize the raw bin normals (differentiably)."""
    norms = np.sqrt((hyperplanes.data ** 2).sum(axis=1))
    if (norms < 1e-12).any():
        bad = int(np.argmax(norms < 1e-12))
        raise DegenerateNormalError(f"hyperplane normal of bin {bad} has vanishing norm; re-initialize it")
    return div(hyperplanes, reshape(sqrt(tsum(mul(hyperplanes, hyperplanes), axis=1)), (-1, 1)))


def project(h: Tensor, normals: Tensor) -> Tensor:
    """h - (w.h) w for matching rows of ``h`` and unit ``normals``."""
    dots = reshape(tsum(mul(h, normals), axis=1), (-1, 1))
    return sub(h, mul(dots, normals))


def project_pairs(h: Tensor, src: np.ndarray, dst: np.ndarray, bins: np.ndarray,
                  hyperplanes: Tensor | None) -> tuple[Tensor, Tensor]:
    hi, hj = take(h, src), take(h, dst)
    if hyperplanes is None:
        return hi, hj
    w = take(unit_normals(hyperplanes), bins)
    return project(hi, w), project(hj, w)


def score(hi: Tensor, hj: Tensor, hr: Tensor) -> Tensor:
    """s = sum_k hi_k hr_k hj_k per row.

    Computed as (hi * hj) * hr so swapping hi and hj is bit-exact.
    """
    return tsum(mul(mul(hi, hj), hr), axis=1)


def score_all(hi: Tensor, hj: Tensor, relations: Tensor) -> Tensor:
    """(P, R) scores of every pair row against every relation row."""
    return matmul(mul(hi, hj), transpose(relations))
