"""Recurrent cell variants.

* vanilla     -- the four-gate LSTM;
* tensorized  -- LSTM with the embedded expand/tensorize/linear/tanh chain
                 inserted at one of four sites:
                   A: replaces the cell-state activation feeding s_t
                      (the proper topology),
                   B: on the c_{t-1} -> c_t path entering the gate sum,
                   C: on the s_{t-1} fed to the four gates,
                   D: replaces the s_t -> x_t output map;
* stacked     -- two LSTM units in series under one output map;
* ho / hot    -- gates consume an explicit state history, linearly (ho) or
                 through a tensor power with chain-factored weights (hot).

Steps are pure given (params, state); the taped forms carry a leading
batch axis, the public single-step wrappers work on plain vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .autodiff import Tape
from .errors import ConfigError, ShapeError
from .tn import TensorizerSpec, chain_forward, count_tn_parameters, init_tn_params

__all__ = [
    "CellSpec",
    "init_params",
    "count_parameters",
    "zero_state",
    "step",
    "run_window",
    "run_rollout",
    "lstm_step",
    "tensorized_step",
    "ho_step",
    "hot_step",
    "jacobian_bound_check",
    "JacobianBoundReport",
]

GATES = ("i", "m", "f", "o")
SITES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class CellSpec:
    """Architecture description for every recurrent cell variant."""

    kind: str                 # 'vanilla' | 'tensorized' | 'stacked' | 'ho' | 'hot'
    hidden: int
    input_dim: int
    site: str = "A"
    tensorizer: Optional[TensorizerSpec] = None
    order: int = 1            # history length for ho/hot
    power: int = 1            # tensor power for hot
    bond: int = 1             # chain bond dimension for hot
    output_activation: str = "identity"

    def __post_init__(self):
        errs = []
        if self.kind not in ("vanilla", "tensorized", "stacked", "ho", "hot"):
            errs.append(f"unknown cell kind {self.kind!r}")
        if self.hidden < 1 or self.input_dim < 1:
            errs.append("hidden and input_dim must be >= 1")
        if self.kind == "tensorized":
            if self.site not in SITES:
                errs.append(f"site must be one of {SITES}, got {self.site!r}")
            if self.tensorizer is None:
                errs.append("tensorized cells need a tensorizer spec")
        if self.kind in ("ho", "hot") and self.order < 1:
            errs.append("history order must be >= 1")
        if self.kind == "hot" and (self.power < 1 or self.bond < 1):
            errs.append("hot cells need power >= 1 and bond >= 1")
        if self.output_activation not in ("identity", "tanh"):
            errs.append(f"unknown output activation {self.output_activation!r}")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def chain_out_dim(self) -> int:
        return self.input_dim if self.site == "D" else self.hidden

    @property
    def history_width(self) -> int:
        """Direct-sum dimension 1 + order*h consumed by ho/hot gates."""
        return 1 + self.order * self.hidden


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


# Gate init scale for tensorized cells: the embedded chain needs the cell
# state to sweep an O(1) range over the data for its polynomial features to
# resolve fast oscillations; benchmark kinds keep the conventional scale.
TENSORIZED_GATE_SCALE = 3.0


def _affine(rng, rows, fan_in, scale=1.0):
    b = scale / math.sqrt(fan_in)
    return rng.uniform(-b, b, (rows, fan_in))


def init_params(spec: CellSpec, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Fresh weights; the forget-gate bias column starts at +1."""
    h, d = spec.hidden, spec.input_dim
    params: Dict[str, np.ndarray] = {}
    if spec.kind in ("vanilla", "tensorized"):
        gs = TENSORIZED_GATE_SCALE if spec.kind == "tensorized" else 1.0
        for g in GATES:
            params[f"w_{g}"] = _affine(rng, h, 1 + d + h, gs)
        params["w_f"][:, 0] = 1.0
        if not (spec.kind == "tensorized" and spec.site == "D"):
            params["w_x"] = _affine(rng, d, 1 + h)
        if spec.kind == "tensorized":
            params.update(
                init_tn_params(spec.tensorizer, h, spec.chain_out_dim, rng, prefix="tn_")
            )
    elif spec.kind == "stacked":
        for g in GATES:
            params[f"l1_w_{g}"] = _affine(rng, h, 1 + d + h)
        params["l1_w_f"][:, 0] = 1.0
        for g in GATES:
            params[f"l2_w_{g}"] = _affine(rng, h, 1 + h + h)
        params["l2_w_f"][:, 0] = 1.0
        params["w_x"] = _affine(rng, d, 1 + h)
    elif spec.kind == "ho":
        fan = d + spec.history_width
        for g in GATES:
            params[f"w_{g}"] = _affine(rng, h, fan)
        params["w_f"][:, d] = 1.0
        params["w_x"] = _affine(rng, d, 1 + h)
    else:  # hot
        m, D = spec.history_width, spec.bond
        for g in GATES:
            params[f"{g}_wx"] = _affine(rng, h, d)
            for p in range(spec.power):
                core = rng.uniform(-0.05, 0.05, (D, m, D))
                core[:, 0, :] += np.eye(D)
                params[f"{g}_core_{p}"] = core
            params[f"{g}_w0"] = rng.uniform(-1.0 / D, 1.0 / D, (h, D, D))
        params["w_x"] = _affine(rng, d, 1 + h)
    return params


def count_parameters(spec: CellSpec) -> int:
    """Exact learnable-scalar count, shared tensors counted once."""
    h, d = spec.hidden, spec.input_dim
    if spec.kind == "vanilla":
        return 4 * h * (1 + d + h) + d * (1 + h)
    if spec.kind == "tensorized":
        base = 4 * h * (1 + d + h)
        if spec.site != "D":
            base += d * (1 + h)
        return base + count_tn_parameters(spec.tensorizer, h, spec.chain_out_dim)
    if spec.kind == "stacked":
        return 4 * h * (1 + d + h) + 4 * h * (1 + 2 * h) + d * (1 + h)
    if spec.kind == "ho":
        return 4 * h * (d + spec.history_width) + d * (1 + h)
    m, D = spec.history_width, spec.bond
    per_gate = h * d + spec.power * D * m * D + h * D * D
    return 4 * per_gate + d * (1 + h)


# ---------------------------------------------------------------------------
# taped forward
# ---------------------------------------------------------------------------


def zero_state(tape: Tape, spec: CellSpec, batch: int):
    z = tape.leaf(np.zeros((batch, spec.hidden)))
    if spec.kind == "stacked":
        return (z, z, z, z)
    if spec.kind in ("ho", "hot"):
        return (z, z, tuple([z] * spec.order))
    return (z, z)


def _out_act(tape: Tape, spec: CellSpec, y: int) -> int:
    return tape.tanh(y) if spec.output_activation == "tanh" else y


def _lstm_core(tape, pv, prefix, z, c_old, c_in=None):
    """Shared gate arithmetic; returns (c_new, gates dict)."""
    gates = {}
    for g in GATES:
        pre = tape.einsum("Bm,hm->Bh", z, pv[f"{prefix}w_{g}"])
        gates[g] = tape.tanh(pre) if g == "m" else tape.sigmoid(pre)
    keep = c_old if c_in is None else c_in
    c_new = tape.add(tape.mul(gates["f"], keep), tape.mul(gates["i"], gates["m"]))
    return c_new, gates


def step(
    tape: Tape,
    spec: CellSpec,
    pv: Dict[str, int],
    x: int,
    state,
    want_pred: bool = True,
    feature_sink: Optional[list] = None,
):
    """One recurrent step on the tape; returns (new_state, x_pred var).

    `want_pred=False` skips the output map (its value feeds nothing when a
    window's intermediate predictions are discarded).  A `feature_sink`
    list collects the chain's pre-readout feature variable of this step.
    """
    batch = tape.value(x).shape[0]
    ones = tape.leaf(np.ones((batch, 1)))

    def chain(v, squash, final):
        out = chain_forward(
            tape, spec.tensorizer, pv, v, "tn_",
            squash_input=squash, final_tanh=final,
            with_features=feature_sink is not None,
        )
        if feature_sink is not None:
            out, feats = out
            feature_sink.append(feats)
        return out

    if spec.kind in ("vanilla", "tensorized"):
        s_old, c_old = state
        site = spec.site if spec.kind == "tensorized" else None
        s_for_gates = s_old
        if site == "C":
            s_for_gates = chain(s_old, False, True)
        z = tape.concat([ones, x, s_for_gates], axis=1)
        c_in = None
        if site == "B":
            c_in = chain(c_old, True, True)
        c_new, gates = _lstm_core(tape, pv, "", z, c_old, c_in)
        if site == "A":
            act = chain(c_new, True, True)
        else:
            act = tape.tanh(c_new)
        s_new = tape.mul(gates["o"], act)
        if not want_pred:
            return (s_new, c_new), None
        if site == "D":
            y = chain(s_new, False, spec.output_activation == "tanh")
            return (s_new, c_new), y
        z2 = tape.concat([ones, s_new], axis=1)
        y = tape.einsum("Bm,dm->Bd", z2, pv["w_x"])
        return (s_new, c_new), _out_act(tape, spec, y)

    if spec.kind == "stacked":
        s1, c1, s2, c2 = state
        z1 = tape.concat([ones, x, s1], axis=1)
        c1n, g1 = _lstm_core(tape, pv, "l1_", z1, c1)
        s1n = tape.mul(g1["o"], tape.tanh(c1n))
        z2 = tape.concat([ones, s1n, s2], axis=1)
        c2n, g2 = _lstm_core(tape, pv, "l2_", z2, c2)
        s2n = tape.mul(g2["o"], tape.tanh(c2n))
        if not want_pred:
            return (s1n, c1n, s2n, c2n), None
        y = tape.einsum("Bm,dm->Bd", tape.concat([ones, s2n], axis=1), pv["w_x"])
        return (s1n, c1n, s2n, c2n), _out_act(tape, spec, y)

    # ho / hot: gates consume the explicit history
    s_old, c_old, hist = state
    base = tape.concat([ones] + list(hist), axis=1)       # (B, 1 + order*h)
    if spec.kind == "ho":
        z = tape.concat([x, base], axis=1)
        c_new, gates = _lstm_core(tape, pv, "", z, c_old)
    else:
        gates = {}
        for g in GATES:
            run = tape.einsum("amb,Bm->Bab", pv[f"{g}_core_0"], base)
            for p in range(1, spec.power):
                nxt = tape.einsum("amb,Bm->Bab", pv[f"{g}_core_{p}"], base)
                run = tape.einsum("Bab,Bbc->Bac", run, nxt)
            pre = tape.add(
                tape.einsum("hab,Bab->Bh", pv[f"{g}_w0"], run),
                tape.einsum("Bd,hd->Bh", x, pv[f"{g}_wx"]),
            )
            gates[g] = tape.tanh(pre) if g == "m" else tape.sigmoid(pre)
        c_new = tape.add(
            tape.mul(gates["f"], c_old), tape.mul(gates["i"], gates["m"])
        )
    s_new = tape.mul(gates["o"], tape.tanh(c_new))
    new_hist = (s_new,) + tuple(hist[:-1])
    if not want_pred:
        return (s_new, c_new, new_hist), None
    y = tape.einsum("Bm,dm->Bd", tape.concat([ones, s_new], axis=1), pv["w_x"])
    return (s_new, c_new, new_hist), _out_act(tape, spec, y)


def run_window(tape: Tape, spec: CellSpec, pv: Dict[str, int], inputs: np.ndarray) -> int:
    """Consume a batch of windows (B, steps, d); return the final prediction var."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != spec.input_dim:
        raise ShapeError(f"window batch must be (B, steps, {spec.input_dim}), got {inputs.shape}")
    state = zero_state(tape, spec, inputs.shape[0])
    pred = None
    last = inputs.shape[1] - 1
    for t in range(inputs.shape[1]):
        state, pred = step(tape, spec, pv, tape.leaf(inputs[:, t]), state, want_pred=(t == last))
    return pred


def run_window_chain_features(
    tape: Tape, spec: CellSpec, pv: Dict[str, int], inputs: np.ndarray
) -> int:
    """Chain features of the final prediction step (tensorized cells only)."""
    if spec.kind != "tensorized":
        raise ConfigError("chain features exist only for tensorized cells")
    inputs = np.asarray(inputs, dtype=np.float64)
    state = zero_state(tape, spec, inputs.shape[0])
    last = inputs.shape[1] - 1
    sink: list = []
    for t in range(inputs.shape[1]):
        state, _ = step(
            tape, spec, pv, tape.leaf(inputs[:, t]), state,
            want_pred=(t == last), feature_sink=sink if t == last else None,
        )
    return sink[-1]


def run_rollout(
    spec: CellSpec, params: Dict[str, np.ndarray], inputs: np.ndarray, n_ahead: int
) -> np.ndarray:
    """Autoregressive continuation: feed predictions back as inputs.

    Returns (B, n_ahead, d) predictions after consuming the window inputs.
    """
    if n_ahead < 1:
        raise ConfigError(f"n_ahead must be >= 1, got {n_ahead}")
    inputs = np.asarray(inputs, dtype=np.float64)
    tape = Tape()
    pv = {k: tape.leaf(v) for k, v in sorted(params.items())}
    state = zero_state(tape, spec, inputs.shape[0])
    pred = None
    for t in range(inputs.shape[1]):
        state, pred = step(tape, spec, pv, tape.leaf(inputs[:, t]), state)
    preds = [tape.value(pred)]
    for _ in range(n_ahead - 1):
        state, pred = step(tape, spec, pv, pred, state)
        preds.append(tape.value(pred))
    return np.stack(preds, axis=1)


# ---------------------------------------------------------------------------
# single-instance wrappers (plain vectors in, plain vectors out)
# ---------------------------------------------------------------------------


def _single(spec, params, x_prev, state_arrays, hist_arrays=None):
    tape = Tape()
    pv = {k: tape.leaf(v) for k, v in sorted(params.items())}
    x = tape.leaf(np.asarray(x_prev, dtype=np.float64)[None, :])
    svals = [tape.leaf(np.asarray(a, dtype=np.float64)[None, :]) for a in state_arrays]
    if hist_arrays is not None:
        hist = tuple(tape.leaf(np.asarray(a, dtype=np.float64)[None, :]) for a in hist_arrays)
        state = (svals[0], svals[1], hist)
    elif len(svals) == 4:
        state = tuple(svals)
    else:
        state = (svals[0], svals[1])
    new_state, pred = step(tape, spec, pv, x, state)
    flat = [tape.value(v)[0] for v in new_state[:2]]
    return tuple(flat), tape.value(pred)[0]


def lstm_step(spec: CellSpec, params, x_prev, state):
    """Vanilla LSTM step: state is (s, c); returns ((s', c'), x_pred)."""
    if spec.kind != "vanilla":
        raise ConfigError("lstm_step requires a vanilla spec")
    return _single(spec, params, x_prev, state)


def tensorized_step(spec: CellSpec, params, x_prev, state):
    """Tensorized step at the spec's insertion site."""
    if spec.kind != "tensorized":
        raise ConfigError("tensorized_step requires a tensorized spec")
    return _single(spec, params, x_prev, state)


def ho_step(spec: CellSpec, params, x_prev, history: Sequence[np.ndarray], state):
    """History-order step; `history` lists s_{t-1}, ..., s_{t-order}."""
    if spec.kind != "ho":
        raise ConfigError("ho_step requires a ho spec")
    if len(history) != spec.order:
        raise ShapeError(f"history must hold {spec.order} states, got {len(history)}")
    return _single(spec, params, x_prev, state, hist_arrays=history)


def hot_step(spec: CellSpec, params, x_prev, history: Sequence[np.ndarray], state):
    """Tensor-power history step with chain-factored gate weights."""
    if spec.kind != "hot":
        raise ConfigError("hot_step requires a hot spec")
    if len(history) != spec.order:
        raise ShapeError(f"history must hold {spec.order} states, got {len(history)}")
    return _single(spec, params, x_prev, state, hist_arrays=history)


# ---------------------------------------------------------------------------
# Jacobian bounds (numerically checkable consequence of the chaos lemma)
# ---------------------------------------------------------------------------


@dataclass
class JacobianBoundReport:
    checks: list          # (name, operator_norm, bound) triples
    tolerance: float

    @property
    def holds(self) -> bool:
        return all(n <= b + self.tolerance for _, n, b in self.checks)


def _op_inf_norm(m: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(m), axis=1))) if m.size else 0.0


def _fd_jacobian(fn, x0: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    y0 = fn(x0)
    jac = np.zeros((y0.size, x0.size))
    for j in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[j] += eps
        xm[j] -= eps
        jac[:, j] = (fn(xp) - fn(xm)) / (2 * eps)
    return jac


def jacobian_bound_check(
    spec: CellSpec, params, x: np.ndarray, state, tolerance: float = 1e-6
) -> JacobianBoundReport:
    """Finite-difference Jacobians vs operator-norm bounds.

    Output map: ||dx_t/ds_t||_inf <= ||W_x||_inf (identity/tanh output);
    sigmoid gates carry the extra 1/4 from sup sigma'; the tanh memory gate
    carries factor 1.
    """
    if spec.kind != "vanilla":
        raise ConfigError("jacobian_bound_check is defined for vanilla cells")
    h, d = spec.hidden, spec.input_dim
    x = np.asarray(x, dtype=np.float64)
    s0, c0 = (np.asarray(a, dtype=np.float64) for a in state)
    checks = []

    def out_map(s):
        y = params["w_x"] @ np.concatenate([[1.0], s])
        return np.tanh(y) if spec.output_activation == "tanh" else y

    checks.append(("output", _op_inf_norm(_fd_jacobian(out_map, s0)), _op_inf_norm(params["w_x"])))

    for g in GATES:
        w = params[f"w_{g}"]
        act = np.tanh if g == "m" else (lambda v: 1.0 / (1.0 + np.exp(-v)))
        factor = 1.0 if g == "m" else 0.25

        def gate_map(xs, w=w, act=act):
            z = np.concatenate([[1.0], xs[:d], xs[d:]])
            return act(w @ z)

        jac = _fd_jacobian(gate_map, np.concatenate([x, s0]))
        checks.append((f"gate_{g}", _op_inf_norm(jac), factor * _op_inf_norm(w)))
    return JacobianBoundReport(checks=checks, tolerance=tolerance)
