"""Attention variants built on dense query/key/value projections.

Three variants share one score path:

* ``softmax_attention`` -- standard scaled dot-product attention,
* ``symmetric_attention`` -- queries tied to keys (score matrix is
  symmetric), which makes one attention application identical to one
  adaptive-step smoothing step on the nonlocal energy (see
  ``neutreno.functional.smoothing_step``),
* ``neutreno_attention`` -- softmax attention plus an anchor residual
  ``lam * (v0 - v)`` pulling values back toward the first layer's values.

The row-stochastic attention matrix is exposed as a first-class value
(``attention_matrix``) because the same matrix doubles as a Markov-chain
transition matrix in ``neutreno.random_walk``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import row_softmax

__all__ = [
    "ProjectionSet",
    "NeutrenoParams",
    "project_qkv",
    "scaled_scores",
    "exp_score_kernel",
    "attention_matrix",
    "softmax_attention",
    "symmetric_attention",
    "neutreno_attention",
]


@dataclass(frozen=True)
class ProjectionSet:
    """Query/key/value projection weights for one attention layer.

    ``w_q`` and ``w_k`` are (key_dim, input_dim); ``w_v`` is
    (value_dim, input_dim).  Inputs are projected as ``x @ w.T``.
    When ``symmetric`` is set, ``w_q`` and ``w_k`` must be entrywise
    identical.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.w_q.shape != self.w_k.shape:
            raise ValueError(
                f"w_q shape {self.w_q.shape} != w_k shape {self.w_k.shape}"
            )
        if self.w_v.shape[1] != self.w_q.shape[1]:
            raise ValueError(
                f"w_v input dim {self.w_v.shape[1]} != w_q input dim {self.w_q.shape[1]}"
            )
        if self.symmetric and not np.array_equal(self.w_q, self.w_k):
            raise ValueError("symmetric projection requires w_q identical to w_k")

    @property
    def key_dim(self) -> int:
        return self.w_q.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_q.shape[1]

    @property
    def value_dim(self) -> int:
        return self.w_v.shape[0]


@dataclass(frozen=True)
class NeutrenoParams:
    """Anchor residual parameters: weight ``lambda_tilde`` and the cached
    first-layer value matrix the residual pulls toward."""

    lambda_tilde: float
    first_layer_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.lambda_tilde < 0:
            raise ValueError(f"lambda_tilde must be nonnegative, got {self.lambda_tilde}")
        object.__setattr__(
            self, "first_layer_values",
            np.asarray(self.first_layer_values, dtype=np.float64),
        )


def project_qkv(x, proj: ProjectionSet):
    """Project input tokens into query, key, and value matrices.

    Returns ``(x @ w_q.T, x @ w_k.T, x @ w_v.T)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != proj.input_dim:
        raise ValueError(
            f"input shape {x.shape} does not match projection input dim {proj.input_dim}"
        )
    return x @ proj.w_q.T, x @ proj.w_k.T, x @ proj.w_v.T


def scaled_scores(queries, keys) -> np.ndarray:
    """Score matrix ``queries @ keys.T / sqrt(key_dim)``."""
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ValueError(f"query shape {q.shape} incompatible with key shape {k.shape}")
    if q.shape[1] == 0:
        raise ValueError("key dimension must be positive")
    return q @ k.T / np.sqrt(q.shape[1])


def exp_score_kernel(queries, keys) -> np.ndarray:
    """Unnormalized affinity kernel ``exp(scaled_scores)``.

    Row-normalizing this kernel gives ``attention_matrix``; it is also the
    natural weight matrix for the nonlocal energy of the state that
    produced the scores.
    """
    return np.exp(scaled_scores(queries, keys))


def attention_matrix(queries, keys) -> np.ndarray:
    """Row-stochastic attention matrix ``row_softmax(scaled_scores)``.

    All entries are strictly positive and each row sums to 1, so the
    result is simultaneously an attention map and a Markov transition
    matrix over token indices.
    """
    return row_softmax(scaled_scores(queries, keys))


def softmax_attention(queries, keys, values) -> np.ndarray:
    """Scaled dot-product attention output ``attention_matrix @ values``.

    Each output row is a convex combination of value rows, so every
    output coordinate lies inside the [min, max] range of its value
    column.
    """
    v = np.asarray(values, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    if v.shape[0] != k.shape[0]:
        raise ValueError(
            f"values have {v.shape[0]} rows but keys have {k.shape[0]}"
        )
    return attention_matrix(queries, keys) @ v


def symmetric_attention(keys, values) -> np.ndarray:
    """Attention with queries tied to keys: ``softmax_attention(k, k, v)``."""
    return softmax_attention(keys, keys, values)


def neutreno_attention(queries, keys, values, params: NeutrenoParams) -> np.ndarray:
    """Softmax attention plus the anchor residual ``lam * (v0 - values)``.

    With ``lambda_tilde == 0`` the residual branch is skipped entirely, so
    the output is bit-identical to ``softmax_attention``.
    """
    v = np.asarray(values, dtype=np.float64)
    v0 = params.first_layer_values
    if v0.shape != v.shape:
        raise ValueError(
            f"first-layer values shape {v0.shape} != values shape {v.shape}"
        )
    out = softmax_attention(queries, keys, v)
    if params.lambda_tilde:
        out = out + params.lambda_tilde * (v0 - v)
    return out
