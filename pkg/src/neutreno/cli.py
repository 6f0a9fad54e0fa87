"""Experiment runner: seeded, file-emitting, byte-reproducible.

Subcommands
-----------
``dynamics``    frozen-transition iteration (plain or anchored), CSV trace
``stack``       multi-layer model over a seed ensemble, CSV per seed + JSON summary
``randomwalk``  stationary-distribution and Monte-Carlo walk checks, JSON report
``gradcheck``   finite-difference gradient checks and identities, JSON report
``tensor``      inspect or convert tensor container files

Exit status: 0 when every requested check passed, 1 with a JSON failure
list on stderr when a check failed, 2 for configuration or I/O errors.
All emitted files are byte-identical across reruns with the same
configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, dynamics, functional, random_walk, stack
from .attention import exp_score_kernel, symmetric_attention
from .config import ConfigError, merge_config, read_config_file
from .linalg import mix_seed, substream
from .tensorfile import TensorFileError, load_tensor, save_tensor

__all__ = ["main", "entry"]

# protocol constant: keeps randomly generated chains fast-mixing
KEY_SCALE = 0.5


# ---------------------------------------------------------------------------
# formatting helpers


def _fmt(x) -> str:
    """Render a float with 17 significant digits (lossless round trip)."""
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonify(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def _warn_lambda(lam: float) -> None:
    if lam > 1.0:
        print(
            f"warning: lambda_tilde = {lam:g} is above 1.0; the anchored "
            "update can become unstable there",
            file=sys.stderr,
        )


# ---------------------------------------------------------------------------
# per-command schemas: key -> (type, default)

DYNAMICS_SCHEMA = {
    "n": (int, 8),
    "key_dim": (int, 4),
    "dim": (int, 3),
    "steps": (int, 200),
    "variant": (str, "softmax"),
    "lambda_tilde": (float, 0.6),
    "overflow_bound": (float, dynamics.DEFAULT_OVERFLOW_BOUND),
    "tokens_path": (str, ""),
    "seed": (int, 0),
    "tol": (float, 1e-8),
}

STACK_SCHEMA = {
    "layers": (int, 12),
    "n": (int, 16),
    "input_dim": (int, 8),
    "key_dim": (int, 8),
    "value_dim": (int, 8),
    "variant": (str, "neutreno"),
    "lambda_tilde": (float, 0.6),
    "residual": (bool, False),
    "init_scale": (float, 1.0),
    "n_seeds": (int, 50),
    "lambda_sweep": ("list[float]", []),
    "expect_separation": (float, -1.0),
    "seed": (int, 0),
    "tol": (float, 1e-8),
}

RANDOMWALK_SCHEMA = {
    "n": (int, 6),
    "key_dim": (int, 4),
    "dim": (int, 3),
    "kernel": (str, "symmetric"),
    "walk_steps": (int, 3),
    "n_samples": (int, 200_000),
    "start": (int, 0),
    "limit_steps": (int, 200),
    "keys_path": (str, ""),
    "transition_path": (str, ""),
    "seed": (int, 0),
    "tol": (float, 1e-8),
}

GRADCHECK_SCHEMA = {
    "n": (int, 6),
    "dim": (int, 3),
    "key_dim": (int, 4),
    "instances": (int, 50),
    "symmetric": (bool, False),
    "seed": (int, 0),
    "tol": (float, 1e-5),
}


def _resolve(schema: dict, args: argparse.Namespace, flag_keys: list[str]) -> dict:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {key: getattr(args, key, None) for key in flag_keys}
    return merge_config(schema, file_values, overrides)


# ---------------------------------------------------------------------------
# dynamics


def cmd_dynamics(args) -> int:
    cfg = _resolve(DYNAMICS_SCHEMA, args, list(DYNAMICS_SCHEMA))
    if cfg["variant"] not in ("softmax", "neutreno"):
        raise ConfigError(
            f"dynamics variant must be softmax or neutreno, got {cfg['variant']!r}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if cfg["tokens_path"]:
        v0 = load_tensor(cfg["tokens_path"])
        if v0.ndim != 2:
            raise ConfigError(f"tokens file must be 2-D, got shape {v0.shape}")
        n = v0.shape[0]
    else:
        n = cfg["n"]
        v0 = substream(cfg["seed"], 1).normal(size=(n, cfg["dim"]))
    keys = substream(cfg["seed"], 0).normal(scale=KEY_SCALE, size=(n, cfg["key_dim"]))
    transition = random_walk.transition_from_scores(keys, keys)

    if cfg["variant"] == "neutreno":
        _warn_lambda(cfg["lambda_tilde"])
        trace = dynamics.run_neutreno_dynamics(
            v0, v0, transition, cfg["lambda_tilde"], cfg["steps"],
            overflow_bound=cfg["overflow_bound"],
        )
    else:
        trace = dynamics.run_plain_dynamics(
            v0, transition, cfg["steps"], overflow_bound=cfg["overflow_bound"]
        )

    rows = [
        [rec.step, float(rec.mean_cosine), float(rec.j_value),
         float(rec.max_pairwise), int(rec.diverged)]
        for rec in trace
    ]
    csv_path = out / "dynamics.csv"
    _write_csv(csv_path, ["step", "mean_cosine", "j_value", "max_pairwise", "diverged"], rows)

    failures = []
    if trace.diverged:
        first = next(rec.step for rec in trace if rec.diverged)
        failures.append(f"dynamics diverged at step {first}")
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return _finish(failures)


# ---------------------------------------------------------------------------
# stack


def _run_stack_unit(cfg, variant: str, lam: float, unit: int):
    model = stack.init_stack(stack.StackConfig(
        layers=cfg["layers"],
        input_dim=cfg["input_dim"],
        key_dim=cfg["key_dim"],
        value_dim=cfg["value_dim"],
        variant=variant,
        lambda_tilde=lam if variant == "neutreno" else 0.0,
        residual=cfg["residual"],
        seed=mix_seed(cfg["seed"], unit, 0),
        init_scale=cfg["init_scale"],
    ))
    x0 = substream(cfg["seed"], unit, 1).normal(size=(cfg["n"], cfg["input_dim"]))
    _, trace = stack.forward(model, x0)
    return trace


def _stack_csv_rows(trace):
    return [
        [rec.step, float(rec.mean_cosine), float(rec.j_value), float(rec.max_pairwise)]
        for rec in trace
    ]


def cmd_stack(args) -> int:
    cfg = _resolve(STACK_SCHEMA, args, list(STACK_SCHEMA))
    if cfg["variant"] not in stack.VARIANTS:
        raise ConfigError(f"unknown stack variant {cfg['variant']!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _warn_lambda(cfg["lambda_tilde"])

    sweep = cfg["lambda_sweep"] or [cfg["lambda_tilde"]]
    compare = cfg["variant"] != "softmax"

    # baseline traces are shared across the sweep
    baseline_traces = []
    for unit in range(cfg["n_seeds"]):
        trace = _run_stack_unit(cfg, "softmax", 0.0, unit)
        baseline_traces.append(trace)
        path = out / f"stack_softmax_seed{unit}.csv"
        _write_csv(path, ["layer", "mean_cosine", "j_value", "max_pairwise"],
                   _stack_csv_rows(trace))

    failures = []
    for lam in sweep:
        per_seed = []
        wins = 0
        for unit in range(cfg["n_seeds"]):
            seed_record = {
                "seed_index": unit,
                "baseline_final_mean_cosine": baseline_traces[unit].final.mean_cosine,
                "baseline_final_j_value": baseline_traces[unit].final.j_value,
                "baseline_final_max_pairwise": baseline_traces[unit].final.max_pairwise,
            }
            if compare:
                trace = _run_stack_unit(cfg, cfg["variant"], lam, unit)
                tag = f"lambda{lam:g}_" if len(sweep) > 1 else ""
                path = out / f"stack_{cfg['variant']}_{tag}seed{unit}.csv"
                _write_csv(path, ["layer", "mean_cosine", "j_value", "max_pairwise"],
                           _stack_csv_rows(trace))
                seed_record.update({
                    "final_mean_cosine": trace.final.mean_cosine,
                    "final_j_value": trace.final.j_value,
                    "final_max_pairwise": trace.final.max_pairwise,
                })
                if trace.final.mean_cosine < baseline_traces[unit].final.mean_cosine:
                    wins += 1
            per_seed.append(seed_record)

        echo_keys = set(STACK_SCHEMA) - {"lambda_sweep", "lambda_tilde", "expect_separation"}
        summary = {
            "config": {k: cfg[k] for k in sorted(echo_keys)},
            "lambda_tilde": lam,
            "n_seeds": cfg["n_seeds"],
            "per_seed": per_seed,
            "fraction_below_baseline": (wins / cfg["n_seeds"]) if compare else None,
        }
        name = f"summary_lambda{lam:g}.json" if len(sweep) > 1 else "summary.json"
        _write_json(out / name, summary)
        print(f"wrote {out / name}")
        if compare and cfg["expect_separation"] >= 0:
            frac = wins / cfg["n_seeds"]
            if frac < cfg["expect_separation"]:
                failures.append(
                    f"separation fraction {frac:.3f} below expected "
                    f"{cfg['expect_separation']:.3f} at lambda_tilde={lam:g}"
                )
    return _finish(failures)


# ---------------------------------------------------------------------------
# randomwalk


def cmd_randomwalk(args) -> int:
    cfg = _resolve(RANDOMWALK_SCHEMA, args, list(RANDOMWALK_SCHEMA))
    if cfg["kernel"] not in ("symmetric", "asymmetric"):
        raise ConfigError(f"kernel must be symmetric or asymmetric, got {cfg['kernel']!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    keys = None
    if cfg["transition_path"]:
        transition = load_tensor(cfg["transition_path"])
        if not random_walk.is_transition_matrix(transition):
            raise ConfigError("supplied transition matrix is not row-stochastic positive")
        n = transition.shape[0]
        symmetric_kernel = False
    else:
        if cfg["keys_path"]:
            keys = load_tensor(cfg["keys_path"])
            if keys.ndim != 2:
                raise ConfigError(f"keys file must be 2-D, got shape {keys.shape}")
        else:
            keys = substream(cfg["seed"], 0).normal(
                scale=KEY_SCALE, size=(cfg["n"], cfg["key_dim"])
            )
        n = keys.shape[0]
        if cfg["kernel"] == "asymmetric":
            queries = substream(cfg["seed"], 2).normal(scale=KEY_SCALE, size=keys.shape)
            transition = random_walk.transition_from_scores(queries, keys)
            symmetric_kernel = False
        else:
            transition = random_walk.transition_from_scores(keys, keys)
            symmetric_kernel = True

    v0 = substream(cfg["seed"], 1).normal(size=(n, cfg["dim"]))
    if not 0 <= cfg["start"] < n:
        raise ConfigError(f"start index {cfg['start']} out of range for {n} states")

    failures = []
    pi_power = random_walk.stationary_power_iteration(transition, tol=1e-12)
    residual_power = float(np.abs(pi_power @ transition - pi_power).sum())

    stationary = {
        "power_iteration": pi_power,
        "residual_l1_power_iteration": residual_power,
        "closed_form": None,
        "residual_l1_closed_form": None,
        "agreement_max_abs_diff": None,
    }
    if symmetric_kernel:
        pi_closed = random_walk.stationary_closed_form(keys)
        residual_closed = float(np.abs(pi_closed @ transition - pi_closed).sum())
        agreement = float(np.abs(pi_closed - pi_power).max())
        stationary.update({
            "closed_form": pi_closed,
            "residual_l1_closed_form": residual_closed,
            "agreement_max_abs_diff": agreement,
        })
        if residual_closed > 1e-10:
            failures.append(
                f"closed-form stationary residual {residual_closed:.3e} above 1e-10"
            )
        if agreement > 1e-9:
            failures.append(
                f"stationary methods disagree by {agreement:.3e} (above 1e-9)"
            )

    k = cfg["walk_steps"]
    stats = random_walk.walk_sample_stats(
        v0, transition, k, cfg["start"], cfg["n_samples"], cfg["seed"]
    )
    expected = random_walk.iterate_state(v0, transition, k)[cfg["start"]]
    deviation = np.abs(stats.mean - expected)
    band = 4.0 * stats.stderr
    within = bool(np.all(deviation <= band))
    if not within:
        failures.append("Monte-Carlo walk mean outside the 4-standard-error band")

    limit = random_walk.limit_vector(pi_power, v0)
    final = random_walk.iterate_state(v0, transition, cfg["limit_steps"])
    limit_distance = float(np.abs(final - limit[None, :]).max())
    if limit_distance > cfg["tol"]:
        failures.append(
            f"limit distance {limit_distance:.3e} above tol {cfg['tol']:.3e} "
            f"after {cfg['limit_steps']} steps"
        )

    report = {
        "config": {k_: cfg[k_] for k_ in RANDOMWALK_SCHEMA},
        "n_states": n,
        "stationary": stationary,
        "walk_check": {
            "steps": k,
            "start": cfg["start"],
            "n_samples": cfg["n_samples"],
            "mc_mean": stats.mean,
            "expected": expected,
            "deviation": deviation,
            "band_4_stderr": band,
            "within_band": within,
        },
        "limit": {
            "steps": cfg["limit_steps"],
            "max_row_distance": limit_distance,
            "tol": cfg["tol"],
            "converged": limit_distance <= cfg["tol"],
        },
        "passed": not failures,
        "failed_checks": failures,
    }
    path = out / "randomwalk.json"
    _write_json(path, report)
    print(f"wrote {path}")
    return _finish(failures)


# ---------------------------------------------------------------------------
# gradcheck


def _rel_error(analytic: np.ndarray, estimate: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(estimate)))
    return float((np.abs(analytic - estimate) / denom).max())


def cmd_gradcheck(args) -> int:
    cfg = _resolve(GRADCHECK_SCHEMA, args, list(GRADCHECK_SCHEMA))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    worst_j = 0.0
    worst_g = 0.0
    worst_identity = 0.0
    for inst in range(cfg["instances"]):
        rng = substream(cfg["seed"], inst)
        u = rng.normal(size=(cfg["n"], cfg["dim"]))
        keys = rng.normal(scale=KEY_SCALE, size=(cfg["n"], cfg["key_dim"]))
        queries = keys if cfg["symmetric"] else rng.normal(
            scale=KEY_SCALE, size=(cfg["n"], cfg["key_dim"])
        )
        anchor = rng.normal(size=(cfg["n"], cfg["dim"]))
        lam = float(rng.uniform(0.1, 2.0))
        weights = exp_score_kernel(queries, keys)

        analytic_j = functional.nonlocal_energy_grad(u, weights)
        analytic_g = functional.fidelity_grad(u, anchor, lam)
        err_j = min(
            _rel_error(analytic_j, functional.central_difference_grad(
                lambda t: functional.nonlocal_energy(t, weights), u, h))
            for h in (1e-4, 1e-5)
        )
        err_g = min(
            _rel_error(analytic_g, functional.central_difference_grad(
                lambda t: functional.fidelity_energy(t, anchor, lam), u, h))
            for h in (1e-4, 1e-5)
        )
        worst_j = max(worst_j, err_j)
        worst_g = max(worst_g, err_g)

        sym_kernel = exp_score_kernel(keys, keys)
        identity = float(np.abs(
            functional.smoothing_step(u, sym_kernel) - symmetric_attention(keys, u)
        ).max())
        worst_identity = max(worst_identity, identity)

    rng = substream(cfg["seed"], cfg["instances"])
    values = rng.normal(size=(cfg["n"], cfg["dim"]))
    keys = rng.normal(scale=KEY_SCALE, size=(cfg["n"], cfg["key_dim"]))
    queries = keys if cfg["symmetric"] else rng.normal(
        scale=KEY_SCALE, size=(cfg["n"], cfg["key_dim"])
    )
    alignment = diagnostics.grad_alignment(values, queries, keys)

    failures = []
    if worst_j > cfg["tol"]:
        failures.append(f"nonlocal gradient max relative error {worst_j:.3e} above {cfg['tol']:.0e}")
    if worst_g > cfg["tol"]:
        failures.append(f"fidelity gradient max relative error {worst_g:.3e} above {cfg['tol']:.0e}")
    if worst_identity > 1e-12:
        failures.append(f"smoothing/attention identity residual {worst_identity:.3e} above 1e-12")

    report = {
        "config": {k: cfg[k] for k in GRADCHECK_SCHEMA},
        "nonlocal_grad_max_rel_error": worst_j,
        "fidelity_grad_max_rel_error": worst_g,
        "smoothing_identity_max_abs_residual": worst_identity,
        "alignment": {
            "mean_cosine": alignment.mean_cosine_alignment,
            "skipped_rows": alignment.skipped_rows,
        },
        "passed": not failures,
        "failed_checks": failures,
    }
    path = out / "gradcheck.json"
    _write_json(path, report)
    print(f"wrote {path}")
    return _finish(failures)


# ---------------------------------------------------------------------------
# tensor


def cmd_tensor(args) -> int:
    if args.tensor_action == "inspect":
        a = load_tensor(args.path)
        info = {
            "shape": list(a.shape),
            "rank": a.ndim,
            "count": int(a.size),
            "min": float(a.min()) if a.size else None,
            "max": float(a.max()) if a.size else None,
            "mean": float(a.mean()) if a.size else None,
        }
        print(json.dumps(_jsonify(info), indent=2, sort_keys=True))
        return 0

    src, dst = Path(args.src), Path(args.dst)
    if src.suffix == ".csv":
        rows = [
            [float(cell) for cell in line.split(",")]
            for line in src.read_text(encoding="utf-8").strip().splitlines()
        ]
        save_tensor(dst, np.array(rows, dtype=np.float64))
    else:
        a = load_tensor(src)
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim != 2:
            raise ConfigError(f"can only convert rank-1/2 tensors to CSV, got rank {a.ndim}")
        lines = [",".join(_fmt(v) for v in row) for row in a]
        dst.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    print(f"wrote {dst}")
    return 0


# ---------------------------------------------------------------------------
# wiring


def _finish(failures: list[str]) -> int:
    if failures:
        print(json.dumps({"failed_checks": failures}), file=sys.stderr)
        return 1
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--tol", type=float, default=None, help="primary check tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neutreno",
        description="attention-as-smoothing numerical laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dynamics", help="frozen-transition token dynamics")
    _add_common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--key-dim", dest="key_dim", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--variant", choices=["softmax", "neutreno"], default=None)
    p.add_argument("--lambda-tilde", dest="lambda_tilde", type=float, default=None)
    p.add_argument("--overflow-bound", dest="overflow_bound", type=float, default=None)
    p.add_argument("--tokens", dest="tokens_path", default=None,
                   help="tensor file with the initial tokens")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("stack", help="multi-layer model over a seed ensemble")
    _add_common(p)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--input-dim", dest="input_dim", type=int, default=None)
    p.add_argument("--key-dim", dest="key_dim", type=int, default=None)
    p.add_argument("--value-dim", dest="value_dim", type=int, default=None)
    p.add_argument("--variant", choices=list(stack.VARIANTS), default=None)
    p.add_argument("--lambda-tilde", dest="lambda_tilde", type=float, default=None)
    p.add_argument("--residual", dest="residual", action="store_const", const=True,
                   default=None)
    p.add_argument("--init-scale", dest="init_scale", type=float, default=None)
    p.add_argument("--n-seeds", dest="n_seeds", type=int, default=None)
    p.add_argument("--lambda-sweep", dest="lambda_sweep", default=None,
                   type=lambda s: [float(t) for t in s.split(",") if t.strip()],
                   help="comma-separated lambda values, one summary each")
    p.add_argument("--expect-separation", dest="expect_separation", type=float,
                   default=None,
                   help="fail unless the variant beats the baseline on this seed fraction")
    p.set_defaults(func=cmd_stack)

    p = sub.add_parser("randomwalk", help="stationary distribution and walk checks")
    _add_common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--key-dim", dest="key_dim", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--kernel", choices=["symmetric", "asymmetric"], default=None)
    p.add_argument("--walk-steps", dest="walk_steps", type=int, default=None)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=None)
    p.add_argument("--start", type=int, default=None)
    p.add_argument("--limit-steps", dest="limit_steps", type=int, default=None)
    p.add_argument("--keys", dest="keys_path", default=None,
                   help="tensor file with key vectors")
    p.add_argument("--transition", dest="transition_path", default=None,
                   help="tensor file with an explicit transition matrix")
    p.set_defaults(func=cmd_randomwalk)

    p = sub.add_parser("gradcheck", help="gradient and identity verification")
    _add_common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--key-dim", dest="key_dim", type=int, default=None)
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--symmetric", dest="symmetric", action="store_const", const=True,
                   default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("tensor", help="inspect or convert tensor files")
    tensor_sub = p.add_subparsers(dest="tensor_action", required=True)
    pi = tensor_sub.add_parser("inspect", help="print shape and summary stats")
    pi.add_argument("path")
    pi.set_defaults(func=cmd_tensor)
    pc = tensor_sub.add_parser("convert", help="convert tensor file <-> csv")
    pc.add_argument("src")
    pc.add_argument("dst")
    pc.set_defaults(func=cmd_tensor)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TensorFileError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
