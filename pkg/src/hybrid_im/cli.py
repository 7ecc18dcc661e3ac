"""Command-line front end.

    hybrid-im check CONFIG
    hybrid-im sample CONFIG
    hybrid-im train CONFIG [--force] [--threads N]
    hybrid-im evaluate CONFIG [MODEL ...]
    hybrid-im compare CONFIG RUN_DIR [RUN_DIR ...]
    hybrid-im demo-regression [--h H] [--Q Q] [--seed S] [--out DIR]

Exit codes: 0 success, 1 numerical failure (or failed assumptions),
2 usage or configuration error.
"""

import argparse
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, dump_config, load_config
from .errors import ConfigError, HybridImError, ModelFormatError, NumericalError
from .evaluation import ensemble_stats, error_report, pointwise_dump, pointwise_header
from .pse import gaussian_regression_demo, pse_solve
from .sampling import build_test_set, collocation_count, make_collocation
from .systems import build_system, check_assumptions, ln_example
from .training import default_collocation, train_ensemble


def make_system(cfg: RunConfig, strict: bool = True):
    params = dict(cfg.system.params)
    try:
        if cfg.system.name == "ln_example":
            return ln_example(strict=strict, **params)
        return build_system(cfg.system.name, **params)
    except TypeError as exc:
        raise ConfigError(f"bad system parameters: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, HybridImError) and not isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def resolve(cfg: RunConfig, sys_) -> RunConfig:
    """Fill in defaults that depend on the system (Q, sampling counts)."""
    from .sampling import SAMPLING_DEFAULTS
    s = cfg.sampling
    if s.Q is None and cfg.scheme.type in ("nn", "hybrid", "poly"):
        s.Q = collocation_count(sys_.N, sys_.M, cfg.scheme.L or 10)
    d = SAMPLING_DEFAULTS.get(sys_.label, {})
    if s.n_ic is None and d:
        s.n_ic = d["n_ic"]
    if s.k_trans is None and d:
        s.k_trans = d["k_trans"]
    return cfg


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _echo(cfg: RunConfig, out: Path):
    (out / "config.resolved.yaml").write_text(dump_config(cfg), encoding="utf-8")


def _metadata(out: Path, command: str, **extra):
    io.write_json(out / f"metadata_{command}.json", {
        "command": command, "finished_utc": datetime.now(timezone.utc).isoformat(), **extra})


def _test_set(cfg, sys_):
    s = cfg.sampling
    return build_test_set(sys_, s.S, s.seed, n_ic=s.n_ic, k_trans=s.k_trans)


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    sys_ = make_system(cfg, strict=False)
    rep = check_assumptions(sys_, args.d_max, args.tol)
    out = _out(cfg)
    _echo(resolve(cfg, sys_), out)
    io.write_json(out / "assumptions.json", rep.to_dict())
    print(f"assumptions {'passed' if rep.passed else 'FAILED'} -> {out / 'assumptions.json'}")
    return 0 if rep.passed else 1


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    sys_ = make_system(cfg)
    cfg = resolve(cfg, sys_)
    out = _out(cfg)
    _echo(cfg, out)
    spec = cfg.scheme_spec()
    if cfg.scheme.type != "pse":
        cset = make_collocation(sys_, cfg.sampling.Q, cfg.sampling.seed,
                                r=spec.r if spec.kind == "hybrid" else None,
                                n_ic=cfg.sampling.n_ic, k_trans=cfg.sampling.k_trans)
        io.write_collocation(out / "collocation.csv", cset)
    io.write_test_set(out / "test_set.csv", _test_set(cfg, sys_))
    print(f"wrote sample files to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    sys_ = make_system(cfg)
    cfg = resolve(cfg, sys_)
    out = _out(cfg)
    _echo(cfg, out)
    if not args.force:
        rep = check_assumptions(sys_)
        if not rep.passed:
            print("assumptions failed; use --force to train anyway", file=sys.stderr)
            return 1
    models_dir = out / "models"
    t0 = time.perf_counter()
    if cfg.scheme.type == "pse":
        sol = pse_solve(sys_, cfg.scheme.h)
        io.save_model(models_dir / "model_000.json", sol.to_model())
        io.write_json(out / "summary.json", {"scheme": "pse", "h": cfg.scheme.h, "n_models": 1,
                                             "order_residuals": sol.order_residuals})
        _metadata(out, "train", wall_time_s=time.perf_counter() - t0)
        print(f"wrote PSE model to {models_dir}")
        return 0
    spec = cfg.scheme_spec()
    cset = make_collocation(sys_, cfg.sampling.Q, cfg.sampling.seed,
                            r=spec.r if spec.kind == "hybrid" else None,
                            n_ic=cfg.sampling.n_ic, k_trans=cfg.sampling.k_trans)
    runs = train_ensemble(spec, sys_, cfg.ensemble.n_real, cfg.lm_config(), cfg.sampling.seed, cset=cset,
                          poly_init=cfg.scheme.poly_init, n_jobs=args.threads)
    losses, walls = [], []
    for i, (model, rep) in enumerate(runs):
        if model is not None:
            io.save_model(models_dir / f"model_{i:03d}.json", model)
            losses.append(rep.final_loss)
        io.write_json(out / "reports" / f"report_{i:03d}.json", rep.to_dict(timing=False))
        walls.append(rep.wall_time_s)
    summary = {"n_real": len(runs), "n_failed": sum(m is None for m, _ in runs),
               "stop_reasons": {k: sum(r.stop_reason == k for _, r in runs)
                                for k in ("FunctionTol", "StepTol", "MaxIter", "Failed")}}
    if losses:
        summary["loss"] = {"mean": float(np.mean(losses)), "p5": float(np.percentile(losses, 5)),
                           "p95": float(np.percentile(losses, 95))}
    io.write_json(out / "summary.json", summary)
    _metadata(out, "train", wall_time_s=time.perf_counter() - t0, run_wall_times_s=walls,
              wall_time_stats={"mean": float(np.mean(walls)), "p5": float(np.percentile(walls, 5)),
                               "p95": float(np.percentile(walls, 95))})
    print(f"trained {len(runs)} realization(s); summary at {out / 'summary.json'}")
    return 1 if summary["n_failed"] == len(runs) else 0


def _model_paths(paths, default_dir: Path):
    if paths:
        return [Path(p) for p in paths]
    found = sorted((default_dir / "models").glob("*.json"))
    if not found:
        raise ModelFormatError(f"no model files given and none found in {default_dir / 'models'}")
    return found


def _evaluate_models(paths, tset, out_dir: Path, dump_first: bool = True):
    reports = []
    for k, p in enumerate(paths):
        model = io.load_model(p)
        rep = error_report(model, tset)
        reports.append(rep)
        io.write_json(out_dir / f"errors_{p.stem}.json", rep.to_dict())
        if dump_first and k == 0:
            io.write_csv(out_dir / f"pointwise_{p.stem}.csv", pointwise_header(tset.Y.shape[1], tset.X.shape[1]),
                         pointwise_dump(model, tset), f"provenance={tset.source} seed={tset.seed}")
    stats = ensemble_stats(reports)
    io.write_json(out_dir / "stats.json", stats.to_dict())
    return stats


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    sys_ = make_system(cfg)
    cfg = resolve(cfg, sys_)
    out = _out(cfg)
    paths = _model_paths(args.models, out)
    for p in paths:
        io.load_model(p)  # fail fast on bad files
    tset = _test_set(cfg, sys_)
    stats = _evaluate_models(paths, tset, out / "evaluation")
    print(f"L2 mean {stats.mean['l2']:.3e} [p5 {stats.p5['l2']:.3e}, p95 {stats.p95['l2']:.3e}] over {stats.n} model(s)")
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    sys_ = make_system(cfg)
    cfg = resolve(cfg, sys_)
    out = _out(cfg)
    tset = _test_set(cfg, sys_)
    table = {}
    for d in args.runs:
        d = Path(d)
        stats = _evaluate_models(_model_paths([], d), tset, out / "compare" / d.name, dump_first=False)
        table[str(d)] = stats.to_dict()
        print(f"{d}: L2 mean {stats.mean['l2']:.3e} [p5 {stats.p5['l2']:.3e}, p95 {stats.p95['l2']:.3e}]")
    io.write_json(out / "comparison.json", table)
    return 0


def cmd_demo_regression(args) -> int:
    if args.Q < args.h + 1:
        raise ConfigError(f"Q = {args.Q} samples cannot determine a degree-{args.h} fit")
    res = gaussian_regression_demo(args.h, args.Q, args.seed)
    out = Path(args.out)
    xs = np.linspace(-0.3, 0.3, 2001)
    from .approximators import basis_table
    V = basis_table("power", args.h, xs)
    target = 1 - np.exp(-10 * xs**2)
    io.write_csv(out / f"regression_h{args.h}_grid.csv", ["x", "target", "mp_abs_err", "lm_abs_err"],
                 np.column_stack([xs, target, np.abs(V @ res["mp_coeffs"] - target),
                                  np.abs(V @ res["lm_coeffs"] - target)]))
    io.write_json(out / f"regression_h{args.h}.json", {
        "h": args.h, "Q": args.Q, "seed": args.seed,
        "mp_coeffs": res["mp_coeffs"], "lm_coeffs": res["lm_coeffs"],
        "mp_max_err": res["mp_max_err"], "lm_max_err": res["lm_max_err"],
        "mp_better": res["mp_max_err"] < res["lm_max_err"],
        "lm_stop_reason": res["lm_report"].stop_reason})
    print(f"h={args.h}: pinv max err {res['mp_max_err']:.3e}, LM max err {res['lm_max_err']:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybrid-im", description="Invariant-manifold approximation experiments")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", help="check the existence conditions of the system")
    c.add_argument("config")
    c.add_argument("--d-max", type=int, default=50)
    c.add_argument("--tol", type=float, default=1e-10)
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("sample", help="write collocation and test sets as CSV")
    s.add_argument("config")
    s.set_defaults(func=cmd_sample)
    t = sub.add_parser("train", help="train an ensemble (or solve the PSE)")
    t.add_argument("config")
    t.add_argument("--force", action="store_true", help="train even if the assumptions fail")
    t.add_argument("--threads", type=int, default=None, help="worker processes (default: CPU count)")
    t.set_defaults(func=cmd_train)
    e = sub.add_parser("evaluate", help="test-set errors of trained models")
    e.add_argument("config")
    e.add_argument("models", nargs="*")
    e.set_defaults(func=cmd_evaluate)
    m = sub.add_parser("compare", help="evaluate several run directories on one test set")
    m.add_argument("config")
    m.add_argument("runs", nargs="+")
    m.set_defaults(func=cmd_compare)
    d = sub.add_parser("demo-regression", help="pseudo-inverse vs LM polynomial regression")
    d.add_argument("--h", type=int, default=20)
    d.add_argument("--Q", type=int, default=200)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="regression_demo")
    d.set_defaults(func=cmd_demo_regression)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "threads") and (args.threads is None or args.threads < 1):
        args.threads = os.cpu_count() or 1
    try:
        return args.func(args)
    except (ConfigError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
