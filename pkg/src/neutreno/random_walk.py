"""Markov-chain view of repeated attention smoothing.

The row-stochastic attention matrix ``A`` doubles as the transition
matrix of a random walk over token indices.  Iterating the frozen map
``u <- A u`` is then the expectation of that walk, its strictly positive
entries guarantee a unique stationary distribution ``pi``, and the
iterates collapse onto the single row ``v_bar = sum_j pi_j v0_j`` -- the
over-smoothed limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import attention_matrix, exp_score_kernel
from .linalg import substream

__all__ = [
    "ConvergenceError",
    "WalkStats",
    "is_transition_matrix",
    "transition_from_scores",
    "iterate_state",
    "stationary_closed_form",
    "stationary_power_iteration",
    "limit_vector",
    "sample_random_walk",
    "walk_sample_stats",
]


class ConvergenceError(RuntimeError):
    """Iteration failed to reach the requested tolerance.

    Carries the last residual in ``residual``.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def is_transition_matrix(a, tol: float = 1e-12) -> bool:
    """True if ``a`` is square with strictly positive entries and rows
    summing to 1 within ``tol``."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if not np.all(a > 0):
        return False
    return bool(np.allclose(a.sum(axis=1), 1.0, rtol=0.0, atol=tol))


def _check_transition(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not is_transition_matrix(a):
        raise ValueError(
            "transition matrix must be square, strictly positive, "
            "with rows summing to 1"
        )
    return a


def transition_from_scores(queries, keys) -> np.ndarray:
    """Transition matrix from attention scores.

    Same code path as the attention matrix: ``row_softmax(q k^T / sqrt(d))``.
    Pass the keys twice for the symmetric (key-key) kernel.
    """
    return attention_matrix(queries, keys)


def iterate_state(v0, transition, steps: int) -> np.ndarray:
    """Apply ``state <- A @ state`` for ``steps`` iterations.

    ``steps == 0`` returns a copy of ``v0``.
    """
    if steps < 0:
        raise ValueError(f"steps must be nonnegative, got {steps}")
    a = _check_transition(transition)
    state = np.array(v0, dtype=np.float64, copy=True)
    for _ in range(steps):
        state = a @ state
    return state


def stationary_closed_form(keys) -> np.ndarray:
    """Stationary distribution of the key-key (symmetric-kernel) chain.

    With ``A = row_softmax(k k^T / sqrt(d))`` the chain is reversible and
    the stationary weights are the normalized kernel row sums::

        pi_i = d_i / sum_j d_j,   d_i = sum_j exp(k_i . k_j / sqrt(d))

    Only valid for the symmetric kernel; chains built from separate
    queries need ``stationary_power_iteration``.
    """
    kernel = exp_score_kernel(keys, keys)
    d = kernel.sum(axis=1)
    return d / d.sum()


def stationary_power_iteration(
    transition, tol: float = 1e-12, max_iters: int = 100_000
) -> np.ndarray:
    """Left-eigenvector power iteration for the stationary distribution.

    Starts from the uniform distribution and repeats ``pi <- pi @ A``
    (renormalizing to sum 1) until the l1 residual ``|pi A - pi|_1``
    drops below ``tol``.  Strict positivity of ``A`` guarantees a unique
    fixed point, so the starting distribution does not matter.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iters``
        sweeps; the error carries the final residual.
    """
    a = _check_transition(transition)
    n = a.shape[0]
    pi = np.full(n, 1.0 / n)
    residual = float("inf")
    for _ in range(max_iters):
        nxt = pi @ a
        nxt = nxt / nxt.sum()
        residual = float(np.abs(nxt @ a - nxt).sum())
        pi = nxt
        if residual <= tol:
            return pi
    raise ConvergenceError(
        f"power iteration residual {residual:.3e} above tol {tol:.3e} "
        f"after {max_iters} iterations",
        residual,
    )


def limit_vector(pi, v0) -> np.ndarray:
    """Over-smoothed limit ``v_bar = sum_j pi_j * v0_j``.

    Every row of ``iterate_state(v0, A, k)`` approaches this vector as
    ``k`` grows.
    """
    pi = np.asarray(pi, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    if pi.ndim != 1 or v0.ndim != 2 or pi.shape[0] != v0.shape[0]:
        raise ValueError(
            f"pi length {pi.shape} does not match state shape {v0.shape}"
        )
    return pi @ v0


@dataclass(frozen=True)
class WalkStats:
    """Monte-Carlo estimate of the walk value at one start index."""

    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int


def walk_sample_stats(
    v0, transition, steps: int, start: int, n_samples: int, seed
) -> WalkStats:
    """Simulate ``n_samples`` independent ``steps``-step walks from ``start``.

    Each walk moves over token indices with row ``i`` of the transition
    matrix as its jump distribution and pays out ``v0[final index]``.
    All randomness is drawn up front as one (n_samples, steps) uniform
    block from ``substream(seed, start, steps)``; walk ``w`` consumes row
    ``w``, so the result is reproducible and independent of how the walks
    would be scheduled.

    Returns the per-coordinate sample mean and its standard error
    ``std / sqrt(n_samples)``.
    """
    a = _check_transition(transition)
    v0 = np.asarray(v0, dtype=np.float64)
    if not 0 <= start < a.shape[0]:
        raise ValueError(f"start index {start} out of range for {a.shape[0]} states")
    if n_samples < 1:
        raise ValueError(f"need at least one sample, got {n_samples}")
    if steps < 0:
        raise ValueError(f"steps must be nonnegative, got {steps}")

    if steps == 0:
        # no randomness consumed; the payout is the start value exactly
        return WalkStats(mean=v0[start].copy(), stderr=np.zeros(v0.shape[1]),
                         n_samples=n_samples)
    uniforms = substream(seed, start, steps).random((n_samples, steps))
    cumulative = np.cumsum(a, axis=1)
    last = a.shape[0] - 1
    states = np.full(n_samples, start)
    for t in range(steps):
        # inverse-CDF jump: count thresholds below the uniform draw; the
        # clip covers draws above the rounded row sum (1 - 1 ulp)
        states = (cumulative[states] < uniforms[:, t : t + 1]).sum(axis=1)
        states = np.minimum(states, last)
    payouts = v0[states]
    mean = payouts.mean(axis=0)
    if n_samples > 1:
        stderr = payouts.std(axis=0, ddof=1) / np.sqrt(n_samples)
    else:
        stderr = np.zeros_like(mean)
    return WalkStats(mean=mean, stderr=stderr, n_samples=n_samples)


def sample_random_walk(
    v0, transition, steps: int, start: int, n_samples: int, seed
) -> np.ndarray:
    """Monte-Carlo mean of the ``steps``-step walk payout from ``start``.

    Matches ``iterate_state(v0, A, steps)[start]`` in expectation; see
    ``walk_sample_stats`` for the error bars.
    """
    return walk_sample_stats(v0, transition, steps, start, n_samples, seed).mean
