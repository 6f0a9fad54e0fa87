"""Dense linear algebra, seeded random generation, and token metrics.

Everything here operates on plain float64 ``numpy`` arrays: matrices are
2-D row-major arrays, vectors are 1-D arrays.  All functions are pure and
never mutate their inputs, so values can be shared freely across threads.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

__all__ = [
    "row_softmax",
    "pairwise_cosine_mean",
    "max_pairwise_distance",
    "seeded_gaussian",
    "solve_linear",
    "substream",
    "mix_seed",
]

# Smallest LU pivot magnitude accepted before a system is declared singular.
PIVOT_TOL = 1e-12


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def row_softmax(scores) -> np.ndarray:
    """Apply the softmax function to each row of a matrix.

    The per-row maximum is subtracted before exponentiation, so the result
    is finite for any finite input and invariant under adding a constant
    to a row.  Every output row sums to 1 and every entry is strictly
    positive.

    Raises
    ------
    ValueError
        If any input entry is NaN or infinite; the message names the
        first offending row.
    """
    scores = _as_matrix(scores, "scores")
    finite = np.isfinite(scores)
    if not finite.all():
        bad_row = int(np.argwhere(~finite)[0, 0])
        raise ValueError(f"non-finite entry in row {bad_row} of scores")
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def pairwise_cosine_mean(tokens) -> float:
    """Mean cosine similarity over all ordered pairs of distinct rows.

    Computes ``(1 / (N (N - 1))) * sum_{i != j} <x_i, x_j> / (|x_i| |x_j|)``
    and clips the result into [-1, 1] to absorb rounding at the
    boundaries.  Requires at least two rows, none of them zero.
    """
    x = _as_matrix(tokens, "tokens")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argwhere(norms == 0.0)[0, 0])
        raise ValueError(f"row {bad} has zero norm; cosine undefined")
    unit = x / norms[:, None]
    gram = unit @ unit.T
    total = gram.sum() - np.trace(gram)
    return float(np.clip(total / (n * (n - 1)), -1.0, 1.0))


def max_pairwise_distance(tokens) -> float:
    """Largest Euclidean distance between any two rows.

    Exactly 0.0 iff all rows are equal (identical rows subtract to exact
    zeros, so no tolerance is involved).
    """
    x = _as_matrix(tokens, "tokens")
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=-1)).max())


def seeded_gaussian(rows: int, cols: int, seed, scale: float = 1.0) -> np.ndarray:
    """Draw a rows-by-cols matrix of i.i.d. N(0, scale^2) entries.

    Uses a generator seeded explicitly from ``seed`` (no global state),
    so the same arguments always produce bit-identical output.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    return rng.normal(loc=0.0, scale=scale, size=(rows, cols))


def substream(seed, *key) -> np.random.Generator:
    """Derive an independent generator from a seed plus integer indices.

    Mixing is delegated to ``numpy.random.SeedSequence([seed, *key])``;
    two calls with the same arguments yield identical streams, and
    distinct keys yield statistically independent streams.  Used to give
    each experimental unit (seed index, walk block, ...) its own stream
    so results do not depend on evaluation order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def mix_seed(seed, *key) -> int:
    """Collapse (seed, indices) into a single derived integer seed.

    Same SeedSequence mixing as ``substream``, exposed as an int for APIs
    that store a scalar seed.
    """
    return int(np.random.SeedSequence([int(seed), *map(int, key)]).generate_state(1)[0])


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` by LU factorization with partial pivoting.

    Parameters
    ----------
    a : (n, n) array
        Square coefficient matrix.
    b : (n,) or (n, m) array
        Right-hand side(s).

    Returns
    -------
    x : array with the shape of ``b``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the matrix is singular or any LU pivot falls below
        ``PIVOT_TOL`` in magnitude.
    """
    a = _as_matrix(a, "a")
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(
            f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}"
        )
    with warnings.catch_warnings():
        # the pivot check below raises for singular systems; scipy's
        # advisory warning about exact-zero diagonals is redundant here
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    pivots = np.abs(np.diag(lu))
    smallest = float(pivots.min()) if pivots.size else 0.0
    if smallest < PIVOT_TOL:
        raise np.linalg.LinAlgError(
            f"matrix is singular or near-singular (pivot {smallest:.3e} < {PIVOT_TOL:.0e})"
        )
    return scipy.linalg.lu_solve((lu, piv), b)
