"""Chaotic data factory: maps, flows, windowing and Lyapunov spectra.

Four discrete maps (logistic, gauss, henon, chirikov) and four continuous
flows (lorenz, thomas, rossler, duffing) with their literature parameters
and initial conditions.  Flows are integrated with classical fixed-step
RK4; the sampling interval dt is purely a sampling choice on top of a
0.01 internal substep.

Dataset protocols:

* discrete maps: two orbits (training IC, testing IC), a sliding window of
  length input_steps+1 over each; the training pool is split 80:20 into
  train/validation by a seeded shuffle.  No standardization.
* flows: one orbit, standardized over the whole array, sliding window,
  then a seeded random partition into test and the train/validation pool.
* real-world CSV: linear interpolation of missing values, optional
  regrouping of w consecutive scalars into one w-dimensional step, then
  the continuous protocol.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from .errors import ConfigError, DataError, NumericError

__all__ = [
    "SystemDef",
    "SYSTEMS",
    "get_system",
    "RawSeries",
    "WindowedDataset",
    "iterate_map",
    "ode_rhs",
    "integrate",
    "resample",
    "standardize",
    "window_discrete",
    "window_continuous",
    "ingest_csv",
    "regroup",
    "lyapunov",
    "save_dataset",
    "load_dataset",
]

RK4_SUBSTEP = 0.01
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemDef:
    name: str
    kind: str                      # 'map' | 'flow'
    dimension: int                 # dimension of the emitted series
    parameters: Dict[str, float]
    ic_train: tuple
    ic_test: Optional[tuple] = None
    second_order: bool = False     # henon consumes x_{n-1}; duffing is 2nd-order

    def with_overrides(self, params: Optional[dict] = None, ic=None, ic_test=None):
        new = dict(self.parameters)
        if params:
            unknown = sorted(set(params) - set(new))
            if unknown:
                raise ConfigError(f"unknown parameters for {self.name}: {unknown}")
            new.update({k: float(v) for k, v in params.items()})
        out = replace(self, parameters=new)
        if ic is not None:
            out = replace(out, ic_train=tuple(float(v) for v in ic))
        if ic_test is not None:
            out = replace(out, ic_test=tuple(float(v) for v in ic_test))
        return out


SYSTEMS: Dict[str, SystemDef] = {
    "logistic": SystemDef("logistic", "map", 1, {"r": 4.0}, (0.61,), (0.11,)),
    "gauss": SystemDef("gauss", "map", 1, {"alpha": 6.2, "beta": -0.55}, (0.31,), (0.91,)),
    "henon": SystemDef(
        "henon", "map", 1, {"a": 1.4, "b": 0.3}, (0.2, 0.3), (0.5, 0.6), second_order=True
    ),
    "chirikov": SystemDef("chirikov", "map", 2, {"K": 2.0}, (0.777, 0.555), (0.333, 0.999)),
    "lorenz": SystemDef(
        "lorenz", "flow", 3, {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}, (0.0, 1.0, 0.0)
    ),
    "thomas": SystemDef("thomas", "flow", 3, {"b": 0.1}, (0.0, 1.0, 0.0)),
    "rossler": SystemDef(
        "rossler", "flow", 3, {"a": 0.1, "b": 0.1, "c": 14.0}, (0.0, 1.0, 0.0)
    ),
    "duffing": SystemDef(
        "duffing",
        "flow",
        1,
        {"alpha": 1.0, "beta": 5.0, "delta": 0.02, "gamma": 8.0, "omega": 0.5},
        (0.0, 1.0),
        second_order=True,
    ),
}


def get_system(name: str, params: Optional[dict] = None, ic=None, ic_test=None) -> SystemDef:
    if name not in SYSTEMS:
        raise ConfigError(f"unknown system {name!r}; valid names: {sorted(SYSTEMS)}")
    return SYSTEMS[name].with_overrides(params, ic, ic_test)


@dataclass
class RawSeries:
    data: np.ndarray          # (T, d)
    dt: float                 # 1.0 for maps
    origin: str


@dataclass
class WindowedDataset:
    input_steps: int
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    series: Dict[str, np.ndarray] = field(default_factory=dict)
    test_series_key: str = ""
    test_starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def dim(self) -> int:
        return self.train_y.shape[1]


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


# ---------------------------------------------------------------------------
# discrete maps
# ---------------------------------------------------------------------------


def _map_step(sys: SystemDef, state: np.ndarray) -> np.ndarray:
    p = sys.parameters
    if sys.name == "logistic":
        x = state[0]
        return np.array([p["r"] * x * (1.0 - x)])
    if sys.name == "gauss":
        x = state[0]
        return np.array([math.exp(-p["alpha"] * x * x) + p["beta"]])
    if sys.name == "henon":
        x, xp = state  # (x_n, x_{n-1})
        return np.array([1.0 - p["a"] * x * x + p["b"] * xp, x])
    if sys.name == "chirikov":
        pn, th = state
        p1 = (pn + p["K"] * math.sin(th)) % TWO_PI
        return np.array([p1, (th + p1) % TWO_PI])
    raise ConfigError(f"{sys.name} is not a discrete map")


def iterate_map(sys: SystemDef, n: int, ic=None) -> RawSeries:
    """Generate n samples of the map's series, starting from the IC values."""
    if sys.kind != "map":
        raise ConfigError(f"{sys.name} is not a discrete map")
    ic = tuple(sys.ic_train if ic is None else ic)
    if sys.name == "henon":
        # state carries (x_n, x_{n-1}); emitted series is x alone
        vals = [ic[0], ic[1]]
        state = np.array([ic[1], ic[0]])
        while len(vals) < n:
            state = _map_step(sys, state)
            if not np.all(np.isfinite(state)):
                raise NumericError(f"henon orbit diverged at step {len(vals)}")
            vals.append(state[0])
        data = np.array(vals[:n])[:, None]
    elif sys.name == "chirikov":
        state = np.array(ic, dtype=np.float64)
        rows = [state]
        for k in range(n - 1):
            state = _map_step(sys, state)
            if not np.all(np.isfinite(state)):
                raise NumericError(f"chirikov orbit diverged at step {k + 1}")
            rows.append(state)
        data = np.stack(rows)
    else:
        state = np.array([ic[0]], dtype=np.float64)
        vals = [state[0]]
        for k in range(n - 1):
            state = _map_step(sys, state)
            if not np.isfinite(state[0]):
                raise NumericError(f"{sys.name} orbit diverged at step {k + 1}")
            vals.append(state[0])
        data = np.array(vals)[:, None]
    return RawSeries(data=data, dt=1.0, origin=f"{sys.name}:ic={ic}")


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


def ode_rhs(sys: SystemDef, state: np.ndarray, t: float) -> np.ndarray:
    p = sys.parameters
    if sys.name == "lorenz":
        x, y, z = state
        return np.array([p["sigma"] * (y - x), x * (p["rho"] - z) - y, x * y - p["beta"] * z])
    if sys.name == "thomas":
        x, y, z = state
        b = p["b"]
        return np.array([math.sin(y) - b * x, math.sin(z) - b * y, math.sin(x) - b * z])
    if sys.name == "rossler":
        x, y, z = state
        return np.array([-y - z, x + p["a"] * y, p["b"] + z * (x - p["c"])])
    if sys.name == "duffing":
        x, v = state
        acc = (
            p["gamma"] * math.cos(p["omega"] * t)
            - p["delta"] * v
            - p["alpha"] * x
            - p["beta"] * x ** 3
        )
        return np.array([v, acc])
    raise ConfigError(f"{sys.name} is not a flow")


def _ode_jacobian(sys: SystemDef, state: np.ndarray) -> np.ndarray:
    p = sys.parameters
    if sys.name == "lorenz":
        x, y, z = state
        return np.array(
            [[-p["sigma"], p["sigma"], 0.0], [p["rho"] - z, -1.0, -x], [y, x, -p["beta"]]]
        )
    if sys.name == "thomas":
        x, y, z = state
        b = p["b"]
        return np.array(
            [[-b, math.cos(y), 0.0], [0.0, -b, math.cos(z)], [math.cos(x), 0.0, -b]]
        )
    if sys.name == "rossler":
        x, y, z = state
        return np.array([[0.0, -1.0, -1.0], [1.0, p["a"], 0.0], [z, 0.0, x - p["c"]]])
    if sys.name == "duffing":
        x, _ = state
        return np.array([[0.0, 1.0], [-p["alpha"] - 3.0 * p["beta"] * x * x, -p["delta"]]])
    raise ConfigError(f"{sys.name} is not a flow")


def _rk4_step(f, y: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = f(y, t)
    k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(y + h * k3, t + h)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(sys: SystemDef, dt_sample: float, n_steps: int, ic=None, rhs=None) -> RawSeries:
    """Sample a flow every dt_sample using RK4 substeps of min(dt, 0.01).

    `rhs` may override the right-hand side (used by self-tests).  Returns
    n_steps + 1 samples including the initial condition.
    """
    if dt_sample <= 0:
        raise ConfigError(f"dt_sample must be positive, got {dt_sample}")
    f = rhs if rhs is not None else (lambda y, t: ode_rhs(sys, y, t))
    state = np.array(sys.ic_train if ic is None else ic, dtype=np.float64)
    n_sub = max(1, int(round(dt_sample / min(dt_sample, RK4_SUBSTEP))))
    h = dt_sample / n_sub
    rows = [state]
    t = 0.0
    for k in range(n_steps):
        for _ in range(n_sub):
            state = _rk4_step(f, state, t, h)
            t += h
        if not np.all(np.isfinite(state)):
            raise NumericError(f"{sys.name} integration diverged at t={t:.3f}")
        rows.append(state)
    full = np.stack(rows)
    data = full[:, : sys.dimension] if sys.name == "duffing" else full
    return RawSeries(data=data, dt=dt_sample, origin=f"{sys.name}:ic={tuple(np.atleast_1d(sys.ic_train if ic is None else ic))}")


# ---------------------------------------------------------------------------
# series transforms
# ---------------------------------------------------------------------------


def resample(series: RawSeries, stride: int) -> RawSeries:
    """Keep every stride-th sample (indices 0, k, 2k, ...)."""
    if stride < 1:
        raise ConfigError(f"resample stride must be >= 1, got {stride}")
    return RawSeries(
        data=series.data[::stride].copy(),
        dt=series.dt * stride,
        origin=f"{series.origin};resample={stride}",
    )


def standardize(series: RawSeries):
    """Per-dimension z-score (sample std, n-1) over the whole array."""
    data = series.data
    if data.shape[0] < 2:
        raise DataError("standardize needs at least 2 samples")
    mean = data.mean(axis=0)
    std = data.std(axis=0, ddof=1)
    if np.any(std <= 0):
        raise DataError("zero variance in at least one dimension")
    out = RawSeries(
        data=(data - mean) / std, dt=series.dt, origin=f"{series.origin};standardized"
    )
    return out, mean, std


def _windows(data: np.ndarray, input_steps: int):
    t = data.shape[0]
    n = t - input_steps
    if n < 1:
        raise ConfigError(
            f"series of length {t} too short for input_steps={input_steps}"
        )
    starts = np.arange(n)
    x = np.stack([data[s : s + input_steps] for s in starts])
    y = data[starts + input_steps]
    return x, y, starts


def window_discrete(
    train_series: RawSeries,
    test_series: RawSeries,
    input_steps: int,
    seed: int,
    val_fraction: float = 0.2,
) -> WindowedDataset:
    """Two-orbit protocol: train/validation from one orbit, test from the other."""
    d = train_series.data.shape[1]
    xin, yin, _ = _windows(train_series.data, input_steps)
    xte, yte, starts = _windows(test_series.data, input_steps)
    n_pool = xin.shape[0]
    n_val = int(round(val_fraction * n_pool))
    perm = _rng(seed, 1).permutation(n_pool)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    return WindowedDataset(
        input_steps=input_steps,
        train_x=xin[train_idx],
        train_y=yin[train_idx],
        val_x=xin[val_idx],
        val_y=yin[val_idx],
        test_x=xte,
        test_y=yte,
        mean=np.zeros(d),
        std=np.ones(d),
        series={"train": train_series.data.copy(), "test": test_series.data.copy()},
        test_series_key="test",
        test_starts=starts,
    )


def window_continuous(
    series: RawSeries,
    input_steps: int,
    sizes: tuple,
    seed: int,
    mean: Optional[np.ndarray] = None,
    std: Optional[np.ndarray] = None,
) -> WindowedDataset:
    """One-orbit protocol: seeded random partition into test and train pool.

    `series` must already be standardized; pass the recorded constants.
    """
    n_train, n_val, n_test = (int(s) for s in sizes)
    x, y, starts = _windows(series.data, input_steps)
    total = x.shape[0]
    need = n_train + n_val + n_test
    if need > total:
        raise ConfigError(f"requested {need} windows but only {total} available")
    d = series.data.shape[1]
    perm = _rng(seed, 2).permutation(total)
    test_idx = np.sort(perm[:n_test])
    pool = perm[n_test : n_test + n_train + n_val]
    train_idx, val_idx = pool[:n_train], pool[n_train:]
    return WindowedDataset(
        input_steps=input_steps,
        train_x=x[train_idx],
        train_y=y[train_idx],
        val_x=x[val_idx],
        val_y=y[val_idx],
        test_x=x[test_idx],
        test_y=y[test_idx],
        mean=np.zeros(d) if mean is None else np.asarray(mean, dtype=np.float64),
        std=np.ones(d) if std is None else np.asarray(std, dtype=np.float64),
        series={"full": series.data.copy()},
        test_series_key="full",
        test_starts=starts[test_idx],
    )


# ---------------------------------------------------------------------------
# real-world CSV ingestion
# ---------------------------------------------------------------------------


def ingest_csv(path: str) -> RawSeries:
    """Read (timestamp, value) rows; missing values are linearly interpolated.

    Leading or trailing missing values are rejected (interpolation only, no
    extrapolation).  Malformed rows raise a parse error with line number.
    """
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            raw = row[1].strip()
            if lineno == 1 and raw and not _is_number(raw):
                continue  # header row
            if raw == "":
                values.append(np.nan)
            elif _is_number(raw):
                values.append(float(raw))
            else:
                raise DataError(f"{path}:{lineno}: malformed value {row[1]!r}")
    if len(values) < 2:
        raise DataError(f"{path}: need at least 2 data rows")
    arr = np.array(values, dtype=np.float64)
    missing = np.isnan(arr)
    if missing[0] or missing[-1]:
        raise DataError(f"{path}: leading/trailing missing values cannot be interpolated")
    if missing.any():
        idx = np.arange(arr.size)
        arr[missing] = np.interp(idx[missing], idx[~missing], arr[~missing])
    return RawSeries(data=arr[:, None], dt=1.0, origin=f"csv:{os.path.basename(path)}")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def regroup(series: RawSeries, window_len: int) -> RawSeries:
    """Group w consecutive scalar steps into one w-dimensional step."""
    if window_len < 1:
        raise ConfigError(f"regroup window must be >= 1, got {window_len}")
    data = series.data
    if data.shape[1] != 1:
        raise DataError("regroup expects a one-dimensional series")
    t = (data.shape[0] // window_len) * window_len
    out = data[:t, 0].reshape(-1, window_len)
    return RawSeries(
        data=out, dt=series.dt * window_len, origin=f"{series.origin};regroup={window_len}"
    )


# ---------------------------------------------------------------------------
# Lyapunov spectra (Benettin with periodic re-orthonormalization)
# ---------------------------------------------------------------------------


def _qr_positive(v: np.ndarray):
    q, r = np.linalg.qr(v)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, np.abs(np.diag(r))


def lyapunov(
    sys: SystemDef,
    n: int = 100_000,
    burn_in: int = 1000,
    ic=None,
    renorm_dt: float = 1.0,
) -> np.ndarray:
    """Exponent spectrum via tangent-space propagation.

    For flows, `n` counts renormalization intervals of length `renorm_dt`
    (RK4 substeps of 0.01 on the variational equations); for maps it counts
    iterations.  One-dimensional maps use the mean of ln|f'|.
    """
    ic = tuple(sys.ic_train if ic is None else ic)
    if sys.kind == "map":
        return _lyapunov_map(sys, n, burn_in, ic)
    return _lyapunov_flow(sys, n, burn_in, ic, renorm_dt)


def _map_deriv(sys: SystemDef, x: float) -> float:
    p = sys.parameters
    if sys.name == "logistic":
        return p["r"] * (1.0 - 2.0 * x)
    if sys.name == "gauss":
        return -2.0 * p["alpha"] * x * math.exp(-p["alpha"] * x * x)
    raise ConfigError(f"{sys.name} has no scalar derivative")


def _map_jacobian(sys: SystemDef, state: np.ndarray) -> np.ndarray:
    p = sys.parameters
    if sys.name == "henon":
        x = state[0]
        return np.array([[-2.0 * p["a"] * x, p["b"]], [1.0, 0.0]])
    if sys.name == "chirikov":
        _, th = state
        kc = p["K"] * math.cos(th)
        return np.array([[1.0, kc], [1.0, 1.0 + kc]])
    raise ConfigError(f"{sys.name} has no 2x2 Jacobian")


def _lyapunov_map(sys: SystemDef, n: int, burn_in: int, ic) -> np.ndarray:
    if sys.name in ("logistic", "gauss"):
        x = ic[0]
        for _ in range(burn_in):
            x = _map_step(sys, np.array([x]))[0]
        acc = 0.0
        for k in range(n):
            d = abs(_map_deriv(sys, x))
            if d == 0.0 or not math.isfinite(d):
                raise NumericError(f"derivative degenerate at step {k}")
            acc += math.log(d)
            x = _map_step(sys, np.array([x]))[0]
        return np.array([acc / n])
    state = np.array([ic[1], ic[0]]) if sys.name == "henon" else np.array(ic, dtype=np.float64)
    for _ in range(burn_in):
        state = _map_step(sys, state)
    v = np.eye(2)
    acc = np.zeros(2)
    for k in range(n):
        v = _map_jacobian(sys, state) @ v
        v, diag = _qr_positive(v)
        if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
            raise NumericError(f"tangent propagation degenerate at step {k}")
        acc += np.log(diag)
        state = _map_step(sys, state)
        if not np.all(np.isfinite(state)):
            raise NumericError(f"orbit diverged at step {k}")
    return acc / n


def _lyapunov_flow(sys: SystemDef, n: int, burn_in: int, ic, renorm_dt: float) -> np.ndarray:
    dim = len(ic)
    n_sub = max(1, int(round(renorm_dt / min(renorm_dt, RK4_SUBSTEP))))
    h = renorm_dt / n_sub

    def aug_rhs(y, t):
        state, v = y[:dim], y[dim:].reshape(dim, dim)
        jac = _ode_jacobian(sys, state)
        return np.concatenate([ode_rhs(sys, state, t), (jac @ v).ravel()])

    state = np.array(ic, dtype=np.float64)
    t = 0.0
    for _ in range(burn_in * n_sub):
        state = _rk4_step(lambda y, tt: ode_rhs(sys, y, tt), state, t, h)
        t += h
    y = np.concatenate([state, np.eye(dim).ravel()])
    acc = np.zeros(dim)
    for k in range(n):
        for _ in range(n_sub):
            y = _rk4_step(aug_rhs, y, t, h)
            t += h
        if not np.all(np.isfinite(y)):
            raise NumericError(f"variational integration diverged at t={t:.2f}")
        v = y[dim:].reshape(dim, dim)
        q, diag = _qr_positive(v)
        acc += np.log(diag)
        y[dim:] = q.ravel()
    return acc / (n * renorm_dt)


# ---------------------------------------------------------------------------
# dataset persistence
# ---------------------------------------------------------------------------

DATASET_FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: str, header, rows, comment: str = ""):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if not _is_number(parts[0]):
                continue  # header
            rows.append([float(v) for v in parts])
    return np.array(rows, dtype=np.float64)


def save_dataset(ds: WindowedDataset, outdir: str, meta: Optional[dict] = None, comment: str = ""):
    """Write one windows CSV per split plus series and a JSON sidecar."""
    os.makedirs(outdir, exist_ok=True)
    s, d = ds.input_steps, ds.dim
    header = [f"in{t}_{j}" for t in range(s) for j in range(d)] + [f"target_{j}" for j in range(d)]
    for split in ("train", "val", "test"):
        x = getattr(ds, f"{split}_x").reshape(-1, s * d)
        y = getattr(ds, f"{split}_y")
        _write_csv(
            os.path.join(outdir, f"windows_{split}.csv"),
            header,
            np.concatenate([x, y], axis=1),
            comment,
        )
    for key, arr in ds.series.items():
        _write_csv(
            os.path.join(outdir, f"series_{key}.csv"),
            [f"dim{j}" for j in range(arr.shape[1])],
            arr,
            comment,
        )
    sidecar = {
        "format_version": DATASET_FORMAT_VERSION,
        "input_steps": ds.input_steps,
        "dim": d,
        "standardization": {"mean": list(ds.mean), "std": list(ds.std)},
        "test_series_key": ds.test_series_key,
        "test_starts": [int(v) for v in ds.test_starts],
        "meta": meta or {},
    }
    with open(os.path.join(outdir, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)


def load_dataset(indir: str) -> WindowedDataset:
    with open(os.path.join(indir, "metadata.json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    if sidecar.get("format_version") != DATASET_FORMAT_VERSION:
        raise DataError(f"unsupported dataset format version in {indir}")
    s, d = int(sidecar["input_steps"]), int(sidecar["dim"])
    parts = {}
    for split in ("train", "val", "test"):
        flat = _read_csv(os.path.join(indir, f"windows_{split}.csv"))
        if flat.size == 0:
            flat = flat.reshape(0, s * d + d)
        parts[f"{split}_x"] = flat[:, : s * d].reshape(-1, s, d)
        parts[f"{split}_y"] = flat[:, s * d :]
    series = {}
    for fn in sorted(os.listdir(indir)):
        if fn.startswith("series_") and fn.endswith(".csv"):
            series[fn[len("series_") : -len(".csv")]] = _read_csv(os.path.join(indir, fn))
    return WindowedDataset(
        input_steps=s,
        mean=np.array(sidecar["standardization"]["mean"], dtype=np.float64),
        std=np.array(sidecar["standardization"]["std"], dtype=np.float64),
        series=series,
        test_series_key=sidecar["test_series_key"],
        test_starts=np.array(sidecar["test_starts"], dtype=np.int64),
        **parts,
    )
