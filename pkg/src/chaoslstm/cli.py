"""Reproducible experiment runner.

Subcommands: generate, train, eval, entropy, lyapunov.  Every experiment is
described by a TOML config with [system], [dataset], [model] and [training]
sections; each emitted CSV embeds the config hash and master seed in a
leading comment line so reruns are byte-comparable.

Exit codes: 0 success, 2 config error, 3 numeric error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import dynamics, tn, training
from .cells import CellSpec, count_parameters
from .dynamics import WindowedDataset
from .errors import (
    CapacityError,
    CheckpointError,
    ConfigError,
    DataError,
    DomainError,
    NumericError,
    ShapeError,
    TrainingError,
)
from .tn import TensorizerSpec
from .training import TrainConfig

__all__ = ["main"]


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

_SECTION_KEYS = {
    "system": {
        "name", "kind", "dt", "resample", "parameters", "ic", "ic_test",
        "csv_path", "regroup",
    },
    "dataset": {"input_steps", "sizes", "seed"},
    "model": {
        "kind", "hidden", "site", "order", "power", "bond",
        "output_activation", "tensorizer",
    },
    "tensorizer": {
        "kind", "length", "phys_dim", "dims", "translation_symmetric_level1",
        "dilation_symmetric", "normalized_layers",
    },
    "training": {
        "epochs", "learning_rate", "batch_size", "seed", "beta1", "beta2",
        "epsilon", "clip_norm",
    },
    "output": {"dir"},
}


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    """Total validation: every offending key is reported before failing."""
    errors = []
    for section in cfg:
        if section not in _SECTION_KEYS:
            errors.append(f"unknown section [{section}]")
    for section in ("system", "dataset", "model", "training", "output"):
        block = cfg.get(section, {})
        if not isinstance(block, dict):
            errors.append(f"[{section}] must be a table")
            continue
        for key in block:
            if key not in _SECTION_KEYS.get(section, set()):
                errors.append(f"unknown key {section}.{key}")
    tz = cfg.get("model", {}).get("tensorizer")
    if isinstance(tz, dict):
        for key in tz:
            if key not in _SECTION_KEYS["tensorizer"]:
                errors.append(f"unknown key model.tensorizer.{key}")
    if errors:
        raise ConfigError("; ".join(errors))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode()
    ).hexdigest()[:12]


def build_cell_spec(cfg: dict) -> CellSpec:
    m = cfg.get("model")
    if not m:
        raise ConfigError("config is missing the [model] section")
    tz = None
    if "tensorizer" in m:
        t = m["tensorizer"]
        for key in ("kind", "length", "phys_dim", "dims"):
            if key not in t:
                raise ConfigError(f"model.tensorizer.{key} is required")
        tz = TensorizerSpec(
            kind=t["kind"],
            length=int(t["length"]),
            phys_dim=int(t["phys_dim"]),
            dims=tuple(t["dims"]),
            translation_symmetric_level1=bool(t.get("translation_symmetric_level1", False)),
            dilation_symmetric=bool(t.get("dilation_symmetric", False)),
            normalized_layers=bool(t.get("normalized_layers", False)),
        )
    for key in ("kind", "hidden"):
        if key not in m:
            raise ConfigError(f"model.{key} is required")
    return CellSpec(
        kind=m["kind"],
        hidden=int(m["hidden"]),
        input_dim=int(m.get("input_dim", 0)) or _system_dim(cfg),
        site=m.get("site", "A"),
        tensorizer=tz,
        order=int(m.get("order", 1)),
        power=int(m.get("power", 1)),
        bond=int(m.get("bond", 1)),
        output_activation=m.get("output_activation", "identity"),
    )


def _system_dim(cfg: dict) -> int:
    s = cfg.get("system", {})
    if s.get("name") == "csv" or "csv_path" in s:
        return int(s.get("regroup", 1))
    sysdef = dynamics.get_system(s.get("name", ""))
    return sysdef.dimension


def build_train_config(cfg: dict, seed_override=None) -> TrainConfig:
    t = cfg.get("training", {})
    if "epochs" not in t:
        raise ConfigError("training.epochs is required")
    seed = int(t.get("seed", 0)) if seed_override is None else int(seed_override)
    return TrainConfig(
        epochs=int(t["epochs"]),
        seed=seed,
        learning_rate=float(t.get("learning_rate", 1e-2)),
        beta1=float(t.get("beta1", 0.9)),
        beta2=float(t.get("beta2", 0.999)),
        epsilon=float(t.get("epsilon", 1e-5)),
        batch_size=int(t.get("batch_size", 64)),
        clip_norm=t.get("clip_norm"),
    )


# ---------------------------------------------------------------------------
# dataset construction
# ---------------------------------------------------------------------------


def build_dataset(cfg: dict, seed_override=None) -> WindowedDataset:
    s = cfg.get("system", {})
    d = cfg.get("dataset", {})
    for key in ("input_steps", "sizes"):
        if key not in d:
            raise ConfigError(f"dataset.{key} is required")
    steps = int(d["input_steps"])
    sizes = tuple(int(v) for v in d["sizes"])
    if len(sizes) != 3:
        raise ConfigError("dataset.sizes must list [train, val, test]")
    seed = int(d.get("seed", 0)) if seed_override is None else int(seed_override)
    stride = int(s.get("resample", 1))

    if s.get("name") == "csv" or "csv_path" in s:
        if "csv_path" not in s:
            raise ConfigError("system.csv_path is required for csv datasets")
        series = dynamics.ingest_csv(s["csv_path"])
        series = dynamics.regroup(series, int(s.get("regroup", 1)))
        series = dynamics.resample(series, stride)
        std_series, mean, std = dynamics.standardize(series)
        return dynamics.window_continuous(std_series, steps, sizes, seed, mean, std)

    sysdef = dynamics.get_system(
        s.get("name", ""), s.get("parameters"), s.get("ic"), s.get("ic_test")
    )
    if sysdef.kind == "map":
        n_pool, n_test = sizes[0] + sizes[1], sizes[2]
        train_raw = dynamics.iterate_map(sysdef, (n_pool + steps - 1) * stride + 1)
        test_raw = dynamics.iterate_map(
            sysdef, (n_test + steps - 1) * stride + 1, ic=sysdef.ic_test
        )
        ds = dynamics.window_discrete(
            dynamics.resample(train_raw, stride),
            dynamics.resample(test_raw, stride),
            steps,
            seed,
            val_fraction=sizes[1] / (sizes[0] + sizes[1]),
        )
        return ds
    dt = float(s.get("dt", 1.0))
    n_samples = sum(sizes) + steps
    raw = dynamics.integrate(sysdef, dt, (n_samples - 1) * stride)
    raw = dynamics.resample(raw, stride)
    std_series, mean, std = dynamics.standardize(raw)
    return dynamics.window_continuous(std_series, steps, sizes, seed, mean, std)


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows, comment):
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    h = config_hash(cfg)
    seed = args.seed if args.seed is not None else cfg.get("dataset", {}).get("seed", 0)
    ds = build_dataset(cfg, args.seed)
    comment = f"config_hash={h} seed={seed}"
    meta = {"config_hash": h, "seed": int(seed), "system": cfg.get("system", {})}
    dynamics.save_dataset(ds, args.out, meta=meta, comment=comment)
    n = ds.train_x.shape[0] + ds.val_x.shape[0] + ds.test_x.shape[0]
    print(f"wrote {n} windows to {args.out} (hash {h})")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    h = config_hash(cfg)
    spec = build_cell_spec(cfg)
    tc = build_train_config(cfg, args.seed)
    if args.dataset:
        ds = dynamics.load_dataset(args.dataset)
    else:
        if "system" not in cfg:
            raise ConfigError(
                "no --dataset given and the config has no [system] block to generate from"
            )
        ds = build_dataset(cfg, args.seed)
    ckpt, curve = training.train(spec, ds, tc)
    ckpt.meta["config_hash"] = h
    test_rmse = training.evaluate(spec, ckpt.params, ds.test_x, ds.test_y)
    comment = f"config_hash={h} seed={tc.seed}"
    os.makedirs(args.out, exist_ok=True)
    training.save_checkpoint(os.path.join(args.out, "checkpoint.json"), ckpt)
    _write_csv(
        os.path.join(args.out, "learning_curve.csv"),
        ["epoch", "train_loss", "val_loss", "val_rmse"],
        curve,
        comment,
    )
    label = spec.kind if spec.kind != "tensorized" else f"tensorized-{spec.tensorizer.kind}-site{spec.site}"
    _write_csv(
        os.path.join(args.out, "rmse_summary.csv"),
        ["model", "parameters", "test_rmse", "best_epoch", "best_val_loss", "seed"],
        [[label, count_parameters(spec), test_rmse, ckpt.meta["epoch"], ckpt.meta["val_loss"], tc.seed]],
        comment,
    )
    print(f"model {label}: {count_parameters(spec)} parameters, test RMSE {test_rmse:.6f}")
    return 0


def _parse_int_list(text: str, what: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what} must be a comma-separated integer list") from exc
    if not vals:
        raise ConfigError(f"{what} must not be empty")
    return vals


def cmd_eval(args) -> int:
    ckpt = training.load_checkpoint(args.checkpoint)
    ds = dynamics.load_dataset(args.dataset)
    horizons = _parse_int_list(args.horizons, "--horizons")
    if min(horizons) < 1:
        raise ConfigError("horizons must be >= 1")
    series = ds.series[ds.test_series_key]
    max_h = max(horizons)
    keep = ds.test_starts + ds.input_steps + max_h - 1 < series.shape[0]
    starts = ds.test_starts[keep]
    if starts.size == 0:
        raise ConfigError("no test windows have targets for the requested horizons")
    windows = np.stack([series[s : s + ds.input_steps] for s in starts])
    preds = training.rollout(ckpt.spec, ckpt.params, windows, max_h)
    comment = f"config_hash={ckpt.meta.get('config_hash', '-')} seed={ckpt.meta.get('seed', 0)}"
    rows = []
    rmse_rows = []
    for k in horizons:
        target = series[starts + ds.input_steps + k - 1]
        err = preds[:, k - 1] - target
        rmse_rows.append([k, float(np.sqrt(np.mean(err ** 2))), len(starts)])
        for i, s in enumerate(starts):
            for j in range(target.shape[1]):
                rows.append([int(s), k, j, preds[i, k - 1, j], target[i, j]])
    os.makedirs(args.out, exist_ok=True)
    _write_csv(
        os.path.join(args.out, "predictions.csv"),
        ["window_start", "horizon", "dim", "prediction", "target"],
        rows,
        comment,
    )
    _write_csv(
        os.path.join(args.out, "rmse_per_horizon.csv"),
        ["horizon", "rmse", "windows"],
        rmse_rows,
        comment,
    )
    for k, r, n in rmse_rows:
        print(f"horizon {k}: RMSE {r:.6f} over {n} windows")
    return 0


def cmd_entropy(args) -> int:
    ckpt = training.load_checkpoint(args.checkpoint)
    spec = ckpt.spec
    if spec.kind != "tensorized":
        raise ConfigError("entropy analysis requires a tensorized checkpoint")
    alphas = [float(v) for v in args.alphas.split(",") if v.strip()]
    if not alphas:
        raise ConfigError("--alphas must not be empty")
    out_dim = spec.chain_out_dim
    tn_params = {k[len("tn_"):]: v for k, v in ckpt.params.items() if k.startswith("tn_")}
    comment = f"config_hash={ckpt.meta.get('config_hash', '-')} seed={ckpt.meta.get('seed', 0)}"
    prof_rows, fit_rows = [], []
    for alpha in alphas:
        profile = tn.ee_scaling_profile(spec.tensorizer, tn_params, alpha, out_dim)
        c0, c1 = tn.fit_log_profile(profile)
        fit_rows.append([alpha, c0, c1])
        prof_rows.extend([[alpha, l, s] for l, s in profile])
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "entropy_profile.csv"), ["alpha", "cut", "entropy"], prof_rows, comment)
    _write_csv(os.path.join(args.out, "entropy_fit.csv"), ["alpha", "C", "C_prime"], fit_rows, comment)
    for alpha, c0, c1 in fit_rows:
        print(f"alpha={alpha}: S(l) ~ {c0:.4f} + {c1:.4f} ln(l)")
    return 0


def cmd_lyapunov(args) -> int:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k] = float(v)
    sysdef = dynamics.get_system(args.system, overrides or None)
    spectrum = dynamics.lyapunov(sysdef, n=args.n, burn_in=args.burn_in)
    for i, lam in enumerate(spectrum, start=1):
        print(f"lambda_{i} = {lam:.6f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_csv(
            os.path.join(args.out, "lyapunov.csv"),
            ["index", "exponent", "n", "burn_in"],
            [[i + 1, lam, args.n, args.burn_in] for i, lam in enumerate(spectrum)],
            f"system={args.system} n={args.n} burn_in={args.burn_in}",
        )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaoslstm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a windowed dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train a model and report test RMSE")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--dataset", default=None, help="dataset dir (else generated from config)")
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="multi-step rollout evaluation")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--horizons", default="1")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_eval)

    n = sub.add_parser("entropy", help="entanglement-entropy profile of a checkpoint")
    n.add_argument("--checkpoint", required=True)
    n.add_argument("--alphas", default="1")
    n.add_argument("--out", required=True)
    n.set_defaults(fn=cmd_entropy)

    ly = sub.add_parser("lyapunov", help="Lyapunov exponent spectrum")
    ly.add_argument("--system", required=True)
    ly.add_argument("--set", action="append", help="parameter override key=value")
    ly.add_argument("--n", type=int, default=20000)
    ly.add_argument("--burn-in", type=int, default=1000, dest="burn_in")
    ly.add_argument("--out", default=None)
    ly.set_defaults(fn=cmd_lyapunov)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ShapeError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, TrainingError, CapacityError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (OSError, DataError, CheckpointError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
