"""Depth dynamics under a frozen transition matrix.

``run_plain_dynamics`` iterates ``u <- A u`` and records per-step metrics;
the diameter of the token set shrinks every step and the state collapses
to a single repeated row.  ``run_neutreno_dynamics`` iterates the anchored
update ``u <- A u + lam * (f - u)``, whose fixed point

    u* = lam * ((1 + lam) I - A)^{-1} f

is generally *not* a constant-row matrix when the anchor ``f`` has
distinct rows: the anchor term keeps token identities apart.
``neutreno_fixed_point`` solves for ``u*`` directly and
``fixed_point_separation`` measures how far apart it keeps anchored-apart
rows.

The transition matrix is frozen across steps throughout this module (the
idealization under which the limit statements are exact); the layered
model in ``neutreno.stack`` recomputes projections per layer instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import max_pairwise_distance, pairwise_cosine_mean, solve_linear, substream
from .functional import nonlocal_energy

__all__ = [
    "TraceRecord",
    "DynamicsTrace",
    "FixedPointReport",
    "SeparationReport",
    "run_plain_dynamics",
    "run_neutreno_dynamics",
    "neutreno_fixed_point",
    "fixed_point_separation",
    "spectral_radius_estimate",
]

DEFAULT_OVERFLOW_BOUND = 1e12


@dataclass(frozen=True)
class TraceRecord:
    """Metrics for one step: the nonlocal energy of the state (weighted by
    the transition matrix itself), mean pairwise cosine, token diameter,
    and whether the overflow bound has been exceeded by this step."""

    step: int
    j_value: float
    mean_cosine: float
    max_pairwise: float
    diverged: bool
    state: np.ndarray | None = field(default=None, repr=False)


class DynamicsTrace:
    """Ordered per-step records, contiguous from step 0."""

    def __init__(self):
        self.records: list[TraceRecord] = []

    def append(self, record: TraceRecord):
        if record.step != len(self.records):
            raise ValueError(
                f"expected step {len(self.records)}, got {record.step}"
            )
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx) -> TraceRecord:
        return self.records[idx]

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def diverged(self) -> bool:
        return self.records[-1].diverged if self.records else False


def _metrics(state: np.ndarray, weights: np.ndarray):
    """(j_value, mean_cosine, max_pairwise) with NaN where undefined."""
    if not np.isfinite(state).all():
        return float("nan"), float("nan"), float("nan")
    j = nonlocal_energy(state, weights)
    mp = max_pairwise_distance(state)
    if state.shape[0] < 2 or np.any(np.linalg.norm(state, axis=1) == 0.0):
        cos = float("nan")
    else:
        cos = pairwise_cosine_mean(state)
    return j, cos, mp


def _run(v0, transition, steps, lam, anchor, overflow_bound, record_states):
    a = np.asarray(transition, dtype=np.float64)
    state = np.array(v0, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != state.shape[0]:
        raise ValueError(
            f"transition shape {a.shape} does not match state shape {state.shape}"
        )
    if anchor is not None and anchor.shape != state.shape:
        raise ValueError(
            f"anchor shape {anchor.shape} != state shape {state.shape}"
        )
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")

    trace = DynamicsTrace()
    diverged = False

    def record(step):
        nonlocal diverged
        with np.errstate(over="ignore", invalid="ignore"):
            finite = np.isfinite(state).all()
            if not finite or np.abs(state).max() > overflow_bound:
                diverged = True  # latches for all later records
            j, cos, mp = _metrics(state, a)
        trace.append(TraceRecord(
            step=step, j_value=j, mean_cosine=cos, max_pairwise=mp,
            diverged=diverged,
            state=state.copy() if record_states else None,
        ))

    record(0)
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = a @ state
            if lam:
                nxt = nxt + lam * (anchor - state)
        state = nxt
        record(k)
    return trace


def run_plain_dynamics(v0, transition, steps: int, *, record_states: bool = False,
                       overflow_bound: float = DEFAULT_OVERFLOW_BOUND) -> DynamicsTrace:
    """Iterate ``u <- A u`` for ``steps`` steps, recording metrics per step.

    The trace has ``steps + 1`` records (step 0 is the initial state).
    Every new row is a convex combination of the previous rows, so
    ``max_pairwise`` never increases and the final diameter is at most
    the initial one.
    """
    return _run(v0, transition, steps, 0.0, None, overflow_bound, record_states)


def run_neutreno_dynamics(v0, anchor, transition, lam_tilde: float, steps: int, *,
                          overflow_bound: float = DEFAULT_OVERFLOW_BOUND,
                          record_states: bool = False) -> DynamicsTrace:
    """Iterate the anchored update ``u <- A u + lam * (anchor - u)``.

    With ``lam_tilde == 0`` this takes the same arithmetic path as
    ``run_plain_dynamics`` and produces a bitwise-identical trace.
    Divergence (any entry above ``overflow_bound`` in magnitude) is
    recorded in the trace, not raised: the iteration matrix ``A - lam I``
    can have spectral radius above 1, in which case the iterates grow.
    The ``diverged`` flag latches from the first offending step onward.
    """
    if lam_tilde < 0:
        raise ValueError(f"lam_tilde must be nonnegative, got {lam_tilde}")
    anchor = np.asarray(anchor, dtype=np.float64)
    return _run(v0, transition, steps, lam_tilde, anchor, overflow_bound, record_states)


def spectral_radius_estimate(m, *, seed: int = 0, iters: int = 2000, window: int = 500) -> float:
    """Power-iteration estimate of the spectral radius of ``m``.

    Tracks the per-step norm growth of a normalized random start vector
    and returns the geometric mean of the last ``window`` growth ratios,
    which averages out the oscillation of complex-pair dominant
    eigenvalues.  Accurate to a few significant digits; eigenvalue pairs
    with nearly tied moduli converge slowest.
    """
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    if n == 1:
        return float(abs(m[0, 0]))
    x = substream(seed, n).normal(size=n)
    x /= np.linalg.norm(x)
    log_ratios = []
    for _ in range(iters):
        y = m @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        log_ratios.append(np.log(norm))
        x = y / norm
    return float(np.exp(np.mean(log_ratios[-window:])))


@dataclass(frozen=True)
class FixedPointReport:
    """Fixed point of the anchored recursion and its quality measures.

    ``residual`` is ``max |u* - (A u* + lam (f - u*))|``;
    ``is_constant_vector`` flags a token diameter below ``constant_tol``;
    ``spectral_ok`` reports whether the iteration matrix ``A - lam I``
    has estimated spectral radius below 1 (so the recursion actually
    converges to ``u*``).
    """

    u_star: np.ndarray
    residual: float
    is_constant_vector: bool
    spectral_ok: bool


def neutreno_fixed_point(anchor, transition, lam_tilde: float, *,
                         constant_tol: float = 1e-10) -> FixedPointReport:
    """Solve for the fixed point ``u* = lam ((1 + lam) I - A)^{-1} f``.

    Requires ``lam_tilde > 0``.  The shifted matrix is always invertible:
    eigenvalues of a row-stochastic matrix lie in the closed unit disk,
    so ``1 + lam`` clears them all.  If the anchor is a constant-row
    matrix, ``u*`` equals the anchor (constant rows are fixed by ``A``).
    """
    if lam_tilde <= 0:
        raise ValueError(f"lam_tilde must be positive, got {lam_tilde}")
    a = np.asarray(transition, dtype=np.float64)
    f = np.asarray(anchor, dtype=np.float64)
    n = a.shape[0]
    if f.ndim != 2 or f.shape[0] != n:
        raise ValueError(f"anchor shape {f.shape} does not match transition {a.shape}")
    shifted = (1.0 + lam_tilde) * np.eye(n) - a
    u_star = solve_linear(shifted, lam_tilde * f)
    residual = float(np.abs(u_star - (a @ u_star + lam_tilde * (f - u_star))).max())
    rho = spectral_radius_estimate(a - lam_tilde * np.eye(n))
    return FixedPointReport(
        u_star=u_star,
        residual=residual,
        is_constant_vector=max_pairwise_distance(u_star) < constant_tol,
        spectral_ok=rho < 1.0,
    )


@dataclass(frozen=True)
class SeparationReport:
    """Row-separation margins of the anchored fixed point.

    For every pair of rows whose anchors differ, ``margins`` holds the
    Euclidean distance between the corresponding fixed-point rows;
    ``min_margin`` and ``worst_pair`` locate the closest such pair, and
    ``separated`` states whether every margin is strictly positive.
    """

    min_margin: float
    worst_pair: tuple[int, int]
    separated: bool
    margins: dict[tuple[int, int], float]
    fixed_point: FixedPointReport


def fixed_point_separation(anchor, transition, lam_tilde: float) -> SeparationReport:
    """Measure how the anchored fixed point keeps distinct-anchor rows apart.

    Requires at least two anchor rows to differ; raises otherwise (with a
    constant anchor the fixed point *is* the anchor, and there is nothing
    to separate).
    """
    f = np.asarray(anchor, dtype=np.float64)
    pairs = [
        (i, j)
        for i in range(f.shape[0])
        for j in range(i + 1, f.shape[0])
        if not np.array_equal(f[i], f[j])
    ]
    if not pairs:
        raise ValueError("anchor rows are all identical; separation is undefined")
    report = neutreno_fixed_point(f, transition, lam_tilde)
    u = report.u_star
    margins = {
        (i, j): float(np.linalg.norm(u[i] - u[j])) for i, j in pairs
    }
    worst = min(margins, key=margins.get)
    min_margin = margins[worst]
    return SeparationReport(
        min_margin=min_margin,
        worst_pair=worst,
        separated=min_margin > 0.0,
        margins=margins,
        fixed_point=report,
    )
