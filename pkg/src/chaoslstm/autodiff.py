"""Reverse-mode automatic differentiation over dense tensor operations.

A Tape records operations as they execute (define-by-run); `backward` walks
the record once in reverse, accumulating adjoints.  Variables are plain
integer handles into the tape that issued them.

All values may carry a leading batch axis; ops either broadcast (add, mul)
or thread the batch index through an explicit einsum subscript.  Pairwise
einsum is executed through a cached transpose/reshape/matmul plan, which is
an order of magnitude faster than np.einsum for the contraction patterns
used by the tensor-network layers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np

from .errors import ShapeError

__all__ = ["Tape", "grad_check", "GradCheckReport", "NORM_EPS"]

NORM_EPS = 1e-8

# ---------------------------------------------------------------------------
# pairwise einsum executor
# ---------------------------------------------------------------------------

_PLANS: dict = {}


def _compile_pair(spec: str, ashape: tuple, bshape: tuple):
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    if len(sa) != len(ashape) or len(sb) != len(bshape):
        raise ShapeError(f"einsum '{spec}' does not match operand ranks")
    if len(set(sa)) != len(sa) or len(set(sb)) != len(sb):
        raise ShapeError(f"einsum '{spec}': repeated index within one operand")
    a_set, b_set, o_set = set(sa), set(sb), set(out)
    if not o_set <= (a_set | b_set):
        raise ShapeError(f"einsum '{spec}': output index missing from inputs")
    for c in sa:
        if c not in b_set and c not in o_set:
            raise ShapeError(f"einsum '{spec}': index '{c}' summed within a alone")
    for c in sb:
        if c not in a_set and c not in o_set:
            raise ShapeError(f"einsum '{spec}': index '{c}' summed within b alone")

    dim = {}
    for c, n in zip(sa, ashape):
        dim[c] = n
    for c, n in zip(sb, bshape):
        if c in dim and dim[c] != n:
            raise ShapeError(
                f"einsum '{spec}': extent mismatch for '{c}' ({dim[c]} vs {n})"
            )
        dim[c] = n

    batch = [c for c in sa if c in b_set and c in o_set]
    con = [c for c in sa if c in b_set and c not in o_set]
    afree = [c for c in sa if c not in b_set]
    bfree = [c for c in sb if c not in a_set]

    perm_a = tuple(sa.index(c) for c in batch + afree + con)
    perm_b = tuple(sb.index(c) for c in batch + con + bfree)

    def p(idx):
        r = 1
        for c in idx:
            r *= dim[c]
        return r

    nb, na, nk, nn = p(batch), p(afree), p(con), p(bfree)
    interim = batch + afree + bfree
    interim_shape = tuple(dim[c] for c in interim)
    perm_out = tuple(interim.index(c) for c in out)
    return (perm_a, (nb, na, nk), perm_b, (nb, nk, nn), interim_shape, perm_out)


def pair_einsum(spec: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-operand einsum via a cached transpose+matmul plan."""
    key = (spec, a.shape, b.shape)
    plan = _PLANS.get(key)
    if plan is None:
        plan = _compile_pair(spec, a.shape, b.shape)
        _PLANS[key] = plan
    perm_a, ra, perm_b, rb, interim_shape, perm_out = plan
    av = a.transpose(perm_a).reshape(ra)
    bv = b.transpose(perm_b).reshape(rb)
    out = np.matmul(av, bv).reshape(interim_shape)
    if perm_out != tuple(range(len(perm_out))):
        out = out.transpose(perm_out)
    return out


def _grad_specs(spec: str) -> tuple[str, str]:
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    return f"{out},{sb}->{sa}", f"{sa},{out}->{sb}"


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    nd = g.ndim - len(shape)
    if nd > 0:
        g = g.sum(axis=tuple(range(nd)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# the tape
# ---------------------------------------------------------------------------


class Tape:
    """Append-only record of tensor operations with reverse replay.

    A tape is single-threaded: one builder, one backward pass.  Distinct
    tapes are independent and may run concurrently.
    """

    def __init__(self):
        self._vals: list[np.ndarray] = []
        self._backs: list[tuple] = []

    # -- construction ------------------------------------------------------

    def leaf(self, value) -> int:
        """Register an input (parameter or constant); returns its VarId."""
        self._vals.append(np.asarray(value, dtype=np.float64))
        self._backs.append(())
        return len(self._vals) - 1

    def _rec(self, value: np.ndarray, backs: tuple) -> int:
        self._vals.append(value)
        self._backs.append(backs)
        return len(self._vals) - 1

    def value(self, var: int) -> np.ndarray:
        return self._vals[var]

    def __len__(self) -> int:
        return len(self._vals)

    # -- arithmetic ops ----------------------------------------------------

    def add(self, a: int, b: int) -> int:
        va, vb = self._vals[a], self._vals[b]
        sa, sb = va.shape, vb.shape
        return self._rec(
            va + vb,
            ((a, lambda g: _unbroadcast(g, sa)), (b, lambda g: _unbroadcast(g, sb))),
        )

    def sub(self, a: int, b: int) -> int:
        va, vb = self._vals[a], self._vals[b]
        sa, sb = va.shape, vb.shape
        return self._rec(
            va - vb,
            ((a, lambda g: _unbroadcast(g, sa)), (b, lambda g: _unbroadcast(-g, sb))),
        )

    def mul(self, a: int, b: int) -> int:
        """Elementwise product with numpy broadcasting."""
        va, vb = self._vals[a], self._vals[b]
        sa, sb = va.shape, vb.shape
        return self._rec(
            va * vb,
            (
                (a, lambda g: _unbroadcast(g * vb, sa)),
                (b, lambda g: _unbroadcast(g * va, sb)),
            ),
        )

    def div(self, a: int, b: int) -> int:
        va, vb = self._vals[a], self._vals[b]
        sa, sb = va.shape, vb.shape
        out = va / vb
        return self._rec(
            out,
            (
                (a, lambda g: _unbroadcast(g / vb, sa)),
                (b, lambda g: _unbroadcast(-g * va / (vb * vb), sb)),
            ),
        )

    def scale(self, a: int, k: float) -> int:
        k = float(k)
        return self._rec(self._vals[a] * k, ((a, lambda g: g * k),))

    def add_scalar(self, a: int, k: float) -> int:
        return self._rec(self._vals[a] + float(k), ((a, lambda g: g),))

    def tanh(self, a: int) -> int:
        out = np.tanh(self._vals[a])
        return self._rec(out, ((a, lambda g: g * (1.0 - out * out)),))

    def sigmoid(self, a: int) -> int:
        out = _stable_sigmoid(self._vals[a])
        return self._rec(out, ((a, lambda g: g * out * (1.0 - out)),))

    def sqrt(self, a: int) -> int:
        out = np.sqrt(self._vals[a])
        return self._rec(out, ((a, lambda g: g * 0.5 / out),))

    # -- contractions ------------------------------------------------------

    def einsum(self, spec: str, a: int, b: int) -> int:
        va, vb = self._vals[a], self._vals[b]
        out = pair_einsum(spec, va, vb)
        ga_spec, gb_spec = _grad_specs(spec)
        return self._rec(
            out,
            (
                (a, lambda g: pair_einsum(ga_spec, g, vb)),
                (b, lambda g: pair_einsum(gb_spec, va, g)),
            ),
        )

    def contract(self, a: int, axes_a: Sequence[int], b: int, axes_b: Sequence[int]) -> int:
        """Taped tensordot; surviving axes ordered a-then-b."""
        va, vb = self._vals[a], self._vals[b]
        if len(axes_a) != len(axes_b):
            raise ShapeError("axis lists must have equal length")
        letters = "abcdefghijklmnopqrstuvwxyz"
        if va.ndim + vb.ndim > len(letters):
            raise ShapeError("contract supports combined rank <= 26")
        sa = list(letters[: va.ndim])
        sb = list(letters[va.ndim : va.ndim + vb.ndim])
        for ia, ib in zip(axes_a, axes_b):
            if va.shape[ia] != vb.shape[ib]:
                raise ShapeError(
                    f"paired extents differ: {va.shape[ia]} vs {vb.shape[ib]}"
                )
            sb[ib % vb.ndim] = sa[ia % va.ndim]
        con = {sa[ia % va.ndim] for ia in axes_a}
        out = [c for c in sa if c not in con] + [c for c in sb if c not in con]
        spec = f"{''.join(sa)},{''.join(sb)}->{''.join(out)}"
        return self.einsum(spec, a, b)

    def tensor_product(self, a: int, b: int) -> int:
        return self.contract(a, [], b, [])

    # -- structural ops ----------------------------------------------------

    def concat(self, vars_: Sequence[int], axis: int) -> int:
        vals = [self._vals[v] for v in vars_]
        out = np.concatenate(vals, axis=axis)
        backs = []
        off = 0
        for v, val in zip(vars_, vals):
            start, stop = off, off + val.shape[axis]
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(start, stop)
            sl = tuple(sl)
            backs.append((v, lambda g, sl=sl: g[sl]))
            off = stop
        return self._rec(out, tuple(backs))

    def take(self, a: int, key) -> int:
        """Basic slicing (the `slice` op); key is any numpy basic index."""
        va = self._vals[a]
        out = va[key]

        def back(g, key=key, shape=va.shape):
            z = np.zeros(shape)
            z[key] = g
            return z

        return self._rec(np.array(out, copy=True), ((a, back),))

    def reshape(self, a: int, shape) -> int:
        va = self._vals[a]
        orig = va.shape
        return self._rec(va.reshape(shape), ((a, lambda g: g.reshape(orig)),))

    def transpose(self, a: int, perm: Sequence[int]) -> int:
        perm = tuple(perm)
        inv = tuple(np.argsort(perm))
        return self._rec(
            np.ascontiguousarray(self._vals[a].transpose(perm)),
            ((a, lambda g: g.transpose(inv)),),
        )

    def sum(self, a: int, axis=None) -> int:
        va = self._vals[a]
        shape = va.shape
        out = np.sum(va, axis=axis)

        def back(g):
            if axis is None:
                return np.full(shape, g)
            g2 = np.expand_dims(g, axis)
            return np.broadcast_to(g2, shape).copy()

        return self._rec(np.asarray(out), ((a, back),))

    def mean(self, a: int, axis=None) -> int:
        va = self._vals[a]
        n = va.size if axis is None else va.shape[axis]
        return self.scale(self.sum(a, axis=axis), 1.0 / n)

    def normalize(self, a: int, axis=None) -> int:
        """x / (||x||_2 + eps) with the norm over `axis` (None = all)."""
        va = self._vals[a]
        n = np.sqrt(np.sum(va * va, axis=axis, keepdims=True))
        denom = n + NORM_EPS
        out = va / denom
        n_safe = np.where(n > 0, n, 1.0)

        def back(g):
            dot = np.sum(g * va, axis=axis, keepdims=True)
            return g / denom - va * dot / (n_safe * denom * denom)

        return self._rec(out, ((a, back),))

    # -- reverse pass ------------------------------------------------------

    def backward(self, out: int) -> Dict[int, np.ndarray]:
        """Adjoints of a scalar output w.r.t. every leaf.

        Gradients accumulate additively across fan-out.  Returns a dict
        keyed by leaf VarId (untouched leaves map to zeros).
        """
        v = self._vals[out]
        if v.size != 1:
            raise ShapeError(f"backward requires a scalar output, got shape {v.shape}")
        grads: list = [None] * (out + 1)
        grads[out] = np.ones_like(v)
        for i in range(out, -1, -1):
            g = grads[i]
            if g is None:
                continue
            backs = self._backs[i]
            for parent, fn in backs:
                c = fn(g)
                if grads[parent] is None:
                    grads[parent] = c
                else:
                    grads[parent] = grads[parent] + c
            if backs:
                grads[i] = None
        result = {}
        for i, backs in enumerate(self._backs[: out + 1]):
            if backs == ():
                result[i] = grads[i] if grads[i] is not None else np.zeros_like(self._vals[i])
        return result


# ---------------------------------------------------------------------------
# finite-difference checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    worst_index: tuple

    def passed(self, tol: float) -> bool:
        return self.max_rel_err < tol


def grad_check(
    build: Callable[[Tape, Dict[str, int]], int],
    params: Dict[str, np.ndarray],
    step: float = 1e-6,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients to central finite differences.

    `build(tape, vars)` must construct a scalar loss from leaf variables
    registered for each named parameter.  Uses the fourth-order central
    stencil so truncation error stays below roundoff for steps in
    [1e-7, 1e-4].  The relative error denominator is
    max(|analytic|, |numeric|, 1e-8) per coordinate.
    """

    def run(ps):
        tape = Tape()
        vs = {k: tape.leaf(v) for k, v in ps.items()}
        loss = build(tape, vs)
        return float(tape.value(loss)), tape, vs, loss

    _, tape, vs, loss = run(params)
    grads = tape.backward(loss)
    analytic = {k: grads[vs[k]] for k in params}

    worst = (0.0, "", ())
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    for name in sorted(params):
        arr = work[name]
        it = np.nditer(arr, flags=["multi_index"]) if arr.ndim else iter([None])
        for _ in it:
            idx = it.multi_index if arr.ndim else ()
            orig = arr[idx]
            vals = []
            for mult in (1.0, -1.0, 2.0, -2.0):
                arr[idx] = orig + mult * step
                vals.append(run(work)[0])
            arr[idx] = orig
            fp, fm, fp2, fm2 = vals
            num = (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * step)
            ana = float(analytic[name][idx])
            denom = max(abs(ana), abs(num), 1e-8)
            rel = abs(ana - num) / denom
            if rel > worst[0]:
                worst = (rel, name, idx)
    return GradCheckReport(max_rel_err=worst[0], worst_param=worst[1], worst_index=worst[2])
