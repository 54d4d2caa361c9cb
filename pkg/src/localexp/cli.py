"""Command-line entry point.

    localexp train       --data d.csv --target y --model mlp --out runs/
    localexp sweep-mnf   --data runs/heldout.csv --target y --model runs/model.txt --auto-sigma
    localexp rho-growth  --data d.csv --target y --auto-sigma --m-grid 25,50,100,200
    localexp bounds      --data d.csv --target y --model runs/model.txt --sigma 1.0
    localexp toy         --kind beta-manifold --beta 5

Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as exp
from .bounds import json_safe as _clean
from .data import Dataset, SplitSpec, load_csv, row_fingerprints, split_indices, standardize, write_csv
from .errors import DataError, NumericalError
from .models import TrainConfig, load_model, mse, save_model, train

OUT_ENV = "LOCALEXP_OUT"
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _config_of(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_rows(path: Path, fields: list[str], rows: list[dict], config: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# config=" + json.dumps(_clean(config), sort_keys=True) + "\n")
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})


def read_rows(path) -> tuple[dict, list[dict]]:
    """Read a results CSV written by this CLI: ``(config, rows)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        config = json.loads(first.split("=", 1)[1]) if first.startswith("# config=") else {}
        rows = list(csv.DictReader(fh))
    return config, rows


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "localexp-out")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise UsageError(f"--delta must lie in (0, 1), got {delta}")


def _sigma_grid(args, data: Dataset) -> list[float]:
    if args.sigma_grid and args.auto_sigma:
        raise UsageError("give either --sigma-grid or --auto-sigma, not both")
    if args.sigma_grid:
        grid = _floats(args.sigma_grid)
        if not grid or any(s <= 0 for s in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise UsageError("--sigma-grid must be positive and strictly increasing")
        return grid
    return exp.auto_sigma_grid(data, args.grid_points, seed=args.seed)


def _load_standardized(args, model_meta: dict | None = None) -> Dataset:
    raw = load_csv(args.data, args.target)
    if model_meta is None:
        return standardize(raw, targets=getattr(args, "standardize_targets", False))
    # replay the black-box model's transform on new rows
    means = np.array(model_meta["feature_means"])
    stds = np.array(model_meta["feature_stds"])
    if means.shape[0] != raw.d:
        raise DataError(f"data has {raw.d} features, model expects {means.shape[0]}")
    y = raw.targets
    if y is not None:
        y = (y - model_meta["target_mean"]) / model_meta["target_std"]
    return Dataset((raw.features - means) / stds, y, means, stds, name=raw.name,
                   feature_names=raw.feature_names, target_name=raw.target_name, standardized=True,
                   target_mean=model_meta["target_mean"], target_std=model_meta["target_std"])


def cmd_train(args) -> int:
    out = _out_dir(args)
    data = _load_standardized(args)
    spec = SplitSpec((args.train_fraction, 1 - args.train_fraction), args.seed)
    tr_idx, te_idx = split_indices(data.m, spec)
    tr, te = data.subset(tr_idx, "train"), data.subset(te_idx, "heldout")
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, batch_size=min(args.batch_size, tr.m),
                      seed=args.seed, l2_penalty=args.l2, hidden=tuple(_ints(args.hidden)))
    model = train(args.model_kind, tr, cfg, clamp=args.clamp)
    meta = {
        "config": _config_of(args),
        "feature_means": [float(v) for v in data.feature_means],
        "feature_stds": [float(v) for v in data.feature_stds],
        "target_mean": float(data.target_mean),
        "target_std": float(data.target_std),
        "split": {"fractions": list(spec.fractions), "seed": spec.seed},
        "train_fingerprints": row_fingerprints(tr.raw_features()),
        "train_mse": mse(model, tr),
        "test_mse": mse(model, te),
    }
    save_model(model, out / "model.txt", meta)
    write_csv(tr, out / "train.csv")
    write_csv(te, out / "heldout.csv")
    _dump_json(out / "train_summary.json", {"config": _config_of(args), "train_mse": meta["train_mse"],
                                            "test_mse": meta["test_mse"], "m_train": tr.m, "m_heldout": te.m})
    print(f"train MSE {meta['train_mse']:.6g}  test MSE {meta['test_mse']:.6g}  -> {out / 'model.txt'}")
    return 0


def _overlap(meta: dict, data: Dataset) -> int:
    known = set(meta.get("train_fingerprints", []))
    return sum(fp in known for fp in row_fingerprints(data.raw_features()))


def cmd_sweep_mnf(args) -> int:
    out = _out_dir(args)
    model, meta = load_model(args.model)
    data = _load_standardized(args, meta)
    n_overlap = _overlap(meta, data)
    if n_overlap and not args.override_separation:
        raise UsageError(
            f"{n_overlap} explanation rows were used to train the model; explanations must be learned on "
            "separate data (pass --override-separation to proceed anyway)"
        )
    grid_src = data
    if args.grid_data:
        if not args.auto_sigma:
            raise UsageError("--grid-data only applies with --auto-sigma")
        grid_src = _load_standardized(argparse.Namespace(data=args.grid_data, target=args.target), meta)
    grid = _sigma_grid(args, grid_src)
    res = exp.sweep_mnf(model, data, grid, args.inner_samples, seed=args.seed, ridge=args.ridge,
                        dataset_name=data.name)
    config = _config_of(args)
    _write_rows(out / "sweep_mnf.csv", ["dataset", "model_kind", "explainer_kind", "sigma", "metric", "value",
                                        "std_error", "inner_samples", "seed"], res.rows, config)
    _, train_v, _ = res.series("trainMnf")
    _, test_v, _ = res.series("testMnf")
    gap = test_v - train_v
    _dump_json(out / "sweep_summary.json", {
        "config": config, "sigma_grid": grid, "global_linear_mnf": res.global_linear_mnf,
        "explain_train_size": res.explain_train_size, "explain_test_size": res.explain_test_size,
        "train_mnf_decreases": exp.count_violations(train_v), "gap_smallest_sigma": gap[0],
        "gap_largest_sigma": gap[-1], "row_overlap": n_overlap,
        "invalid_rows": sum(not r["valid"] for r in res.rows),
    })
    print(f"{len(res.rows)} rows -> {out / 'sweep_mnf.csv'}")
    return 0


def _sweep_from_files(path) -> exp.SweepResult:
    _, rows = read_rows(path)
    summary = json.loads((Path(path).parent / "sweep_summary.json").read_text())
    parsed = [dict(r, sigma=float(r["sigma"]), value=float(r["value"]), std_error=float(r["std_error"]))
              for r in rows]
    return exp.SweepResult(parsed, summary["global_linear_mnf"], summary["explain_train_size"],
                           summary["explain_test_size"])


def cmd_rho_growth(args) -> int:
    out = _out_dir(args)
    _check_delta(args.delta)
    data = _load_standardized(args)
    grid = _sigma_grid(args, data)
    m_grid = _ints(args.m_grid) if args.m_grid else None
    if m_grid is None:
        top = data.m
        m_grid = sorted({max(2, top // 2 ** j) for j in range(5)})
    if max(m_grid) > data.m:
        raise UsageError(f"--m-grid value {max(m_grid)} exceeds dataset size {data.m}")
    growth = exp.rho_growth(data, grid, m_grid, args.repeats, args.samples_per_m, args.seed, args.delta)
    config = _config_of(args)
    rows = [t for g in growth for t in g["table"]]
    _write_rows(out / "rho_growth.csv", ["m", "rho", "std_error", "sigma", "seed"], rows, config)
    sweep = _sweep_from_files(args.sweep) if args.sweep else None
    flags = exp.no_saturation_flags(growth, sweep)
    _dump_json(out / "rho_growth.json", {
        "config": config, "m_grid": m_grid,
        "exponents": [{k: g[k] for k in ("sigma", "exponent", "intercept", "r_squared")} for g in growth],
        "no_saturation": flags if sweep is not None else None,
        "any_no_saturation": any(f["flag"] for f in flags) if sweep is not None else None,
    })
    for g in growth:
        print(f"sigma {g['sigma']:.4g}  exponent {g['exponent']:.3f}")
    return 0


def cmd_bounds(args) -> int:
    out = _out_dir(args)
    _check_delta(args.delta)
    model, meta = load_model(args.model)
    data = _load_standardized(args, meta)
    if data.targets is None:
        raise DataError("bounds need a labeled dataset (--target)")
    sp = meta.get("split")
    if not sp:
        raise DataError("model file records no train/held-out split")
    tr_idx, te_idx = split_indices(data.m, SplitSpec(tuple(sp["fractions"]), sp["seed"]))
    sample, heldout = data.subset(tr_idx, "train"), data.subset(te_idx, "heldout")
    if row_fingerprints(sample.raw_features()) != meta.get("train_fingerprints"):
        raise DataError("dataset does not reproduce the model's training rows; pass the file it was trained on")
    sigma = args.sigma if args.sigma is not None else float(np.median(exp.auto_sigma_grid(heldout, seed=args.seed)))
    reports = exp.bounds_run(model, sample, heldout, sigma, args.inner_samples, args.delta, args.seed,
                             B=args.B, ridge=args.ridge)
    config = _config_of(args)
    for name, rep in reports.items():
        rep.provenance["config"] = config
        rep.provenance["model_file"] = str(args.model)
        (out / f"bounds_{name}.json").write_text(rep.to_json() + "\n", encoding="utf-8")
        print(f"{name}: rhs {rep.rhs:.6g}  lhs {rep.lhs_estimate:.6g} +- {rep.lhs_std_error:.2g}  "
              f"{'holds' if rep.holds() else 'VIOLATED'}")
    return 0


def cmd_toy(args) -> int:
    out = _out_dir(args)
    rep = exp.toy_report(args.kind, beta=args.beta, m=args.m, k=args.k, M=args.M, nf_samples=args.nf_samples,
                         seed=args.seed, inner_samples=args.inner_samples)
    rep["config"] = _config_of(args)
    _dump_json(out / f"toy_{args.kind}.json", rep)
    print(json.dumps(_clean({k: v for k, v in rep.items() if k != "config"}), sort_keys=True))
    return 0


def _common(p: argparse.ArgumentParser, data=True):
    p.add_argument("--config", help="key=value file; explicit flags take precedence")
    if data:
        p.add_argument("--data", required=False)
        p.add_argument("--target", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./localexp-out)")


def _sigma_flags(p):
    p.add_argument("--sigma-grid", default=None, help="comma-separated increasing widths")
    p.add_argument("--auto-sigma", action="store_true", help="log-spaced from min to half max distance")
    p.add_argument("--grid-points", type=int, default=exp.AUTO_GRID_POINTS)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localexp", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the black-box model")
    _common(p)
    p.add_argument("--model", dest="model_kind", choices=["linear", "mlp"], default="mlp")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", default="64,64")
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--clamp", type=float, default=None)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--standardize-targets", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep-mnf", help="train/test MNF over neighborhood widths")
    _common(p)
    p.add_argument("--model", required=False)
    _sigma_flags(p)
    p.add_argument("--inner-samples", type=int, default=256)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--override-separation", action="store_true")
    p.add_argument("--grid-data", default=None,
                   help="CSV whose pairwise distances set the --auto-sigma grid (default: --data)")
    p.set_defaults(func=cmd_sweep_mnf)

    p = sub.add_parser("rho-growth", help="growth exponent of rho in m for each width")
    _common(p)
    _sigma_flags(p)
    p.add_argument("--m-grid", default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--samples-per-m", type=int, default=10)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--sweep", default=None, help="sweep_mnf.csv to join for the no-saturation flags")
    p.add_argument("--standardize-targets", action="store_true")
    p.set_defaults(func=cmd_rho_growth)

    p = sub.add_parser("bounds", help="evaluate the generalization bounds")
    _common(p)
    p.add_argument("--model", required=False)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--inner-samples", type=int, default=64)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--B", type=float, default=None)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("toy", help="analytic toy constructions")
    _common(p, data=False)
    p.add_argument("--kind", choices=["beta-manifold", "correlated-3d", "uniform-overlap"], required=False)
    p.add_argument("--beta", type=float, default=5.0)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--k", type=float, default=0.5)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--nf-samples", type=int, default=100_000)
    p.add_argument("--inner-samples", type=int, default=256)
    p.set_defaults(func=cmd_toy)
    return ap


REQUIRED = {
    "train": ["data", "target"],
    "sweep-mnf": ["data", "model"],
    "rho-growth": ["data"],
    "bounds": ["data", "target", "model"],
    "toy": ["kind"],
}


def read_config(path) -> dict:
    cfg = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        cfg[k.lstrip("-").replace("-", "_")] = v
    return cfg


def parse_args(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        actions = {o.lstrip("-").replace("-", "_"): a for a in sub._actions for o in a.option_strings}
        defaults = {}
        for k, v in cfg.items():
            if k not in actions or k in ("config", "help"):
                raise UsageError(f"unknown config key {k!r}")
            a = actions[k]
            if isinstance(a, argparse._StoreTrueAction):
                    defaults[a.dest] = v.lower() in ("1", "true", "yes", "on")
            else:
                defaults[a.dest] = a.type(v) if a.type else v
        sub.set_defaults(**defaults)
        args = ap.parse_args(argv)
    missing = [k for k in REQUIRED[args.command] if getattr(args, k, None) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
