"""Dense kernels for incremental ridge regression."""

from __future__ import annotations

import math

import numpy as np

# Full re-inversion period for rank-one maintained inverses.
REINVERT_EVERY = 1000


class NumericDriftError(FloatingPointError):
    """A maintained inverse stopped being finite; rebuild from the accumulated matrix."""


def rank_one_update(Minv: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, float]:
    """``((M + x x^T)^{-1}, ln(1 + x^T M^{-1} x))`` from ``Minv = M^{-1}``."""
    v = Minv @ x
    q = float(x @ v)
    # a non-finite v always shows up in q
    if not math.isfinite(q) or q <= -1.0:
        raise NumericDriftError(f"rank-one update degenerate (x^T Minv x = {q})")
    return Minv - (v[:, None] * v) / (1.0 + q), math.log1p(q)


def sm_update(Minv: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Return ``(M + x x^T)^{-1}`` given ``Minv = M^{-1}`` (Sherman-Morrison)."""
    return rank_one_update(Minv, x)[0]


def logdet_update(logdet: float, Minv: np.ndarray, x: np.ndarray) -> float:
    """ln|M + x x^T| from ln|M| via the matrix determinant lemma."""
    return logdet + math.log1p(float(x @ Minv @ x))


def sample_unit_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the unit sphere in R^d (normalized Gaussian)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    while True:
        g = rng.standard_normal(d)
        norm = np.linalg.norm(g)
        if norm > 0.0:
            return g / norm


def sample_unit_sphere_batch(shape: tuple[int, ...], d: int, rng: np.random.Generator) -> np.ndarray:
    """Array of shape ``shape + (d,)`` whose last-axis rows are uniform on the sphere."""
    g = rng.standard_normal(shape + (d,))
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    # a zero row has probability zero; redraw it anyway
    bad = norms[..., 0] == 0.0
    while bad.any():
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        bad = norms[..., 0] == 0.0
    return g / norms
