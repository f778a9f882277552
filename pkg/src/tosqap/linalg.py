"""Dense matrix helpers and deterministic pseudo-randomness.

All state in this package is carried by dense, row-major ``float64``
numpy arrays. Randomness always flows through an explicitly passed
``numpy.random.Generator`` backed by the PCG64 bit generator, so that a
seed fully determines every stream on every platform.
"""

from __future__ import annotations

import numpy as np


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and return ``x`` as a 2-D float64 array.

    Raises ``ValueError`` on empty dimensions or non-finite entries.
    """
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def frobenius_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Standard trace inner product sum_ij X_ij * Y_ij."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.dot(x.ravel(), y.ravel()))


def frobenius_norm(x: np.ndarray) -> float:
    """Euclidean norm of the flattened array."""
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64).ravel()))


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the single entropy source of the package."""
    return np.random.Generator(np.random.PCG64(seed))


def draw_uniform_index(rng: np.random.Generator, t_max: int) -> int:
    """Draw an index uniformly from {1, ..., t_max}, advancing ``rng``."""
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    return int(rng.integers(1, t_max + 1))
