import math

import numpy as np
import pytest

from chaoslstm.autodiff import Tape, grad_check
from chaoslstm.cells import (
    CellSpec,
    count_parameters,
    ho_step,
    hot_step,
    init_params,
    jacobian_bound_check,
    lstm_step,
    run_rollout,
    run_window,
    step,
    tensorized_step,
    zero_state,
)
from chaoslstm.errors import ConfigError
from chaoslstm.tn import TensorizerSpec


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestVanillaStep:
    def test_zero_network(self):
        spec = CellSpec("vanilla", 3, 2)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, np.random.default_rng(0)).items()}
        (s, c), x = lstm_step(spec, params, np.zeros(2), (np.zeros(3), np.zeros(3)))
        assert np.array_equal(s, np.zeros(3))
        assert np.array_equal(c, np.zeros(3))
        assert np.array_equal(x, np.zeros(2))

    def test_perfect_memory_limit(self):
        spec = CellSpec("vanilla", 2, 1)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, np.random.default_rng(0)).items()}
        params["w_f"][:, 0] = 1e3  # sigmoid -> 1
        c_prev = np.array([0.37, -1.2])
        (_, c), _ = lstm_step(spec, params, np.zeros(1), (np.zeros(2), c_prev))
        np.testing.assert_allclose(c, c_prev, rtol=1e-12)

    def test_scalar_oracle(self):
        spec = CellSpec("vanilla", 1, 1)
        rng = np.random.default_rng(1)
        params = init_params(spec, rng)
        x, s0, c0 = 0.3, -0.2, 0.5
        (s, c), xp = lstm_step(spec, params, np.array([x]), (np.array([s0]), np.array([c0])))
        z = np.array([1.0, x, s0])
        i = sigmoid(params["w_i"][0] @ z)
        m = np.tanh(params["w_m"][0] @ z)
        f = sigmoid(params["w_f"][0] @ z)
        o = sigmoid(params["w_o"][0] @ z)
        c_ref = f * c0 + i * m
        s_ref = o * np.tanh(c_ref)
        x_ref = params["w_x"][0] @ np.array([1.0, s_ref])
        assert c[0] == pytest.approx(c_ref, rel=1e-12)
        assert s[0] == pytest.approx(s_ref, rel=1e-12)
        assert xp[0] == pytest.approx(x_ref, rel=1e-12)

    def test_state_bounded(self):
        rng = np.random.default_rng(2)
        for kind, kw in [
            ("vanilla", {}),
            ("tensorized", dict(site="A", tensorizer=TensorizerSpec("mera", 4, 2, (2, 2)))),
            ("stacked", {}),
            ("ho", dict(order=2)),
            ("hot", dict(order=2, power=2, bond=2)),
        ]:
            spec = CellSpec(kind, 3, 2, **kw)
            params = init_params(spec, rng)
            params = {k: v * 5.0 for k, v in params.items()}  # push toward saturation
            tape = Tape()
            pv = {k: tape.leaf(v) for k, v in sorted(params.items())}
            st = zero_state(tape, spec, 4)
            xs = rng.uniform(-3, 3, (4, 2))
            st, _ = step(tape, spec, pv, tape.leaf(xs), st)
            s_val = tape.value(st[0])
            assert np.all(np.abs(s_val) <= 1.0 + 1e-12)


class TestTensorizedSites:
    def test_site_a_full_small_equals_polynomial(self):
        # L=2, P=2 full kind vs. the explicit (1,q1)x(1,q2) feature expansion
        tn = TensorizerSpec("full", 2, 2)
        spec = CellSpec("tensorized", 2, 1, "A", tn)
        rng = np.random.default_rng(3)
        params = init_params(spec, rng)
        x = np.array([0.4])
        s0, c0 = rng.uniform(-0.5, 0.5, 2), rng.uniform(-0.5, 0.5, 2)
        (_, c1), xp = tensorized_step(spec, params, x, (s0, c0))
        z = np.concatenate([[1.0], x, s0])
        i = sigmoid(params["w_i"] @ z)
        m = np.tanh(params["w_m"] @ z)
        f = sigmoid(params["w_f"] @ z)
        o = sigmoid(params["w_o"] @ z)
        c_ref = f * c0 + i * m
        np.testing.assert_allclose(c1, c_ref, rtol=1e-12)
        t = np.tanh(c_ref)
        q = np.einsum("lph,h->lp", params["tn_expand"], t)
        feats = np.kron(np.array([1.0, q[0, 0]]), np.array([1.0, q[1, 0]]))
        chain = np.tanh(params["tn_w"] @ feats + params["tn_b"])
        s_ref = o * chain
        x_ref = params["w_x"] @ np.concatenate([[1.0], s_ref])
        np.testing.assert_allclose(xp, x_ref, rtol=1e-12)
        # reachable monomials are exactly {1, q1, q2, q1 q2}
        assert feats.shape == (4,)
        np.testing.assert_allclose(feats, [1.0, q[1, 0], q[0, 0], q[0, 0] * q[1, 0]])

    def test_site_d_identity_insertion_reduces_to_vanilla(self):
        h, d = 3, 2
        vanilla = CellSpec("vanilla", h, d)
        rng = np.random.default_rng(4)
        vparams = init_params(vanilla, rng)
        # full tensorizer, L=1, P=h+1, expand = identity, readout = W_x
        tn = TensorizerSpec("full", 1, h + 1)
        spec = CellSpec("tensorized", h, d, "D", tn)
        params = {k: v for k, v in vparams.items() if k != "w_x"}
        params["tn_expand"] = np.eye(h)[None, :, :]  # (L=1, P-1=h, h)
        params["tn_w"] = vparams["w_x"].copy()       # acts on (1, s)
        params["tn_b"] = np.zeros(d)
        x = rng.uniform(-1, 1, d)
        s0, c0 = rng.uniform(-0.5, 0.5, h), rng.uniform(-0.5, 0.5, h)
        (sv, cv), xv = lstm_step(vanilla, vparams, x, (s0, c0))
        (st, ct), xt = tensorized_step(spec, params, x, (s0, c0))
        np.testing.assert_allclose(st, sv, rtol=1e-12)
        np.testing.assert_allclose(xt, xv, rtol=1e-12)

    def test_zero_state_site_a_trace(self):
        tn = TensorizerSpec("mera", 4, 2, (2, 2))
        spec = CellSpec("tensorized", 2, 1, "A", tn)
        rng = np.random.default_rng(5)
        params = init_params(spec, rng)
        params = {k: np.zeros_like(v) if k.startswith("w_") else v for k, v in params.items()}
        # zero gates: c_1 = 0, expand columns are (1, 0); output gate sigmoid(0) = 1/2
        from chaoslstm.tn import contract_mera, expand
        cols = expand(np.zeros(2), params["tn_expand"])
        np.testing.assert_allclose(cols[0], 1.0)
        np.testing.assert_allclose(cols[1:], 0.0)
        chain = np.tanh(contract_mera(cols, tn, {k[3:]: v for k, v in params.items() if k.startswith("tn_")}))
        (s, _), _ = tensorized_step(spec, params, np.array([0.3]), (np.zeros(2), np.zeros(2)))
        np.testing.assert_allclose(s, 0.5 * chain, rtol=1e-12)

    def test_invalid_site(self):
        with pytest.raises(ConfigError):
            CellSpec("tensorized", 2, 1, "E", TensorizerSpec("full", 2, 2))


class TestHistoryCells:
    def test_ho_order_one_equals_vanilla(self):
        h, d = 3, 2
        rng = np.random.default_rng(6)
        vspec = CellSpec("vanilla", h, d)
        vparams = init_params(vspec, rng)
        hspec = CellSpec("ho", h, d, order=1)
        # vanilla gates consume (1, x, s); ho gates consume (x, 1, s)
        hparams = {"w_x": vparams["w_x"].copy()}
        for g in ("i", "m", "f", "o"):
            w = vparams[f"w_{g}"]
            hparams[f"w_{g}"] = np.concatenate([w[:, 1 : 1 + d], w[:, :1], w[:, 1 + d :]], axis=1)
        x = rng.uniform(-1, 1, d)
        s0, c0 = rng.uniform(-0.5, 0.5, h), rng.uniform(-0.5, 0.5, h)
        (sv, cv), xv = lstm_step(vspec, vparams, x, (s0, c0))
        (sh, ch), xh = ho_step(hspec, hparams, x, [s0], (s0, c0))
        np.testing.assert_allclose(sh, sv, rtol=1e-12)
        np.testing.assert_allclose(xh, xv, rtol=1e-12)

    def test_hot_power_one_equals_ho(self):
        h, d, order = 2, 1, 2
        rng = np.random.default_rng(7)
        ho = CellSpec("ho", h, d, order=order)
        hop = init_params(ho, rng)
        m = 1 + order * h
        hot = CellSpec("hot", h, d, order=order, power=1, bond=h)
        hotp = {"w_x": hop["w_x"].copy()}
        for g in ("i", "m", "f", "o"):
            w = hop[f"w_{g}"]
            hotp[f"{g}_wx"] = w[:, :d].copy()
            gate_hist = w[:, d:]  # (h, m)
            # ring with one core: w0[g,a,b] = delta_ga delta_ab, core[a,mu,b] = delta_ab G[a,mu]
            core = np.zeros((h, m, h))
            for a in range(h):
                core[a, :, a] = gate_hist[a]
            hotp[f"{g}_core_0"] = core
            w0 = np.zeros((h, h, h))
            for g_i in range(h):
                w0[g_i, g_i, g_i] = 1.0
            hotp[f"{g}_w0"] = w0
        x = rng.uniform(-1, 1, d)
        s0, c0 = rng.uniform(-0.5, 0.5, h), rng.uniform(-0.5, 0.5, h)
        hist = [rng.uniform(-0.5, 0.5, h) for _ in range(order)]
        (sh, ch), xh = ho_step(ho, hop, x, hist, (s0, c0))
        (st, ct), xt = hot_step(hot, hotp, x, hist, (s0, c0))
        np.testing.assert_allclose(st, sh, rtol=1e-12)
        np.testing.assert_allclose(xt, xh, rtol=1e-12)

    def test_hot_quadratic_feature_oracle(self):
        # P_h=2, order=2, h=1: gate pre-activation equals the explicit
        # quadratic feature map contracted with the assembled gate tensor
        h, d, order = 1, 1, 2
        spec = CellSpec("hot", h, d, order=order, power=2, bond=2)
        rng = np.random.default_rng(8)
        params = init_params(spec, rng)
        m = 1 + order * h
        x = rng.uniform(-1, 1, d)
        s0, c0 = rng.uniform(-0.5, 0.5, h), rng.uniform(-0.5, 0.5, h)
        hist = [rng.uniform(-0.5, 0.5, h) for _ in range(order)]
        base = np.concatenate([[1.0], *hist])
        feats = np.kron(base, base)
        g = "i"
        c0p, c1p, w0 = params[f"{g}_core_0"], params[f"{g}_core_1"], params[f"{g}_w0"]
        gate_tensor = np.einsum("hab,amc,cnb->hmn", w0, c0p, c1p).reshape(h, m * m)
        pre_ref = gate_tensor @ feats + params[f"{g}_wx"] @ x
        tape = Tape()
        pv = {k: tape.leaf(v) for k, v in sorted(params.items())}
        st = (
            tape.leaf(s0[None]),
            tape.leaf(c0[None]),
            tuple(tape.leaf(hh[None]) for hh in hist),
        )
        run = tape.einsum("amb,Bm->Bab", pv[f"{g}_core_0"], tape.leaf(base[None]))
        nxt = tape.einsum("amb,Bm->Bab", pv[f"{g}_core_1"], tape.leaf(base[None]))
        run = tape.einsum("Bab,Bbc->Bac", run, nxt)
        pre = tape.add(
            tape.einsum("hab,Bab->Bh", pv[f"{g}_w0"], run),
            tape.einsum("Bd,hd->Bh", tape.leaf(x[None]), pv[f"{g}_wx"]),
        )
        np.testing.assert_allclose(tape.value(pre)[0], pre_ref, rtol=1e-10)

    def test_history_length_enforced(self):
        spec = CellSpec("ho", 2, 1, order=3)
        params = init_params(spec, np.random.default_rng(9))
        with pytest.raises(Exception):
            ho_step(spec, params, np.zeros(1), [np.zeros(2)], (np.zeros(2), np.zeros(2)))


class TestParameterCounts:
    def test_paper_benchmarks(self):
        assert count_parameters(CellSpec("vanilla", 7, 3)) == 332
        assert count_parameters(CellSpec("vanilla", 2, 1)) == 35
        assert count_parameters(CellSpec("vanilla", 4, 3)) == 143

    def test_closed_form_grid(self):
        for h in range(1, 11):
            for d in range(1, 11):
                expected = 4 * h * (1 + d + h) + d * (1 + h)
                assert count_parameters(CellSpec("vanilla", h, d)) == expected

    def test_ho_exact(self):
        assert count_parameters(CellSpec("ho", 2, 1, order=4)) == 83

    def test_counts_match_init_sizes(self):
        rng = np.random.default_rng(10)
        specs = [
            CellSpec("vanilla", 5, 2),
            CellSpec("stacked", 4, 3),
            CellSpec("ho", 3, 2, order=3),
            CellSpec("hot", 2, 1, order=3, power=2, bond=2),
            CellSpec("tensorized", 3, 2, "A", TensorizerSpec("mps", 4, 2, (2, 3))),
            CellSpec("tensorized", 3, 2, "D", TensorizerSpec("mera", 8, 2, (2, 2, 3))),
        ]
        for spec in specs:
            params = init_params(spec, rng)
            assert sum(v.size for v in params.values()) == count_parameters(spec)


class TestGradients:
    CASES = [
        CellSpec("vanilla", 3, 2),
        CellSpec("tensorized", 2, 2, "A", TensorizerSpec("full", 3, 2)),
        CellSpec("tensorized", 2, 2, "B", TensorizerSpec("mps", 4, 2, (2, 2))),
        CellSpec("tensorized", 2, 2, "C", TensorizerSpec("mera", 4, 2, (2, 2))),
        CellSpec(
            "tensorized", 2, 2, "D",
            TensorizerSpec("mera", 4, 2, (2, 2), normalized_layers=True),
        ),
        CellSpec("stacked", 2, 2),
        CellSpec("ho", 2, 2, order=3),
        CellSpec("hot", 2, 2, order=2, power=2, bond=2),
    ]

    @pytest.mark.parametrize("spec", CASES, ids=lambda s: f"{s.kind}-{s.site}")
    def test_one_step_loss_grad(self, spec):
        rng = np.random.default_rng(11)
        params = init_params(spec, rng)
        x = rng.uniform(-1, 1, (2, spec.input_dim))
        tgt = rng.uniform(-1, 1, (2, spec.input_dim))

        def build(tape, pv):
            st = zero_state(tape, spec, 2)
            st, pred = step(tape, spec, pv, tape.leaf(x), st)
            diff = tape.sub(pred, tape.leaf(tgt))
            return tape.mean(tape.reshape(tape.mul(diff, diff), (-1,)))

        assert grad_check(build, params, step=1e-5).max_rel_err < 1e-4


class TestJacobianBounds:
    def test_zero_weights(self):
        spec = CellSpec("vanilla", 3, 2)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, np.random.default_rng(0)).items()}
        rep = jacobian_bound_check(spec, params, np.zeros(2), (np.zeros(3), np.zeros(3)))
        assert rep.holds
        assert all(n == pytest.approx(0.0, abs=1e-9) for _, n, _ in rep.checks)

    def test_random_instance(self):
        spec = CellSpec("vanilla", 3, 2)
        rng = np.random.default_rng(12)
        params = init_params(spec, rng)
        rep = jacobian_bound_check(
            spec, params, rng.uniform(-1, 1, 2), (rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
        )
        assert rep.holds

    def test_bounds_scale_homogeneously(self):
        spec = CellSpec("vanilla", 2, 2)
        rng = np.random.default_rng(13)
        params = init_params(spec, rng)
        scaled = {k: 10.0 * v for k, v in params.items()}
        r1 = jacobian_bound_check(spec, params, np.zeros(2), (np.zeros(2), np.zeros(2)))
        r2 = jacobian_bound_check(spec, scaled, np.zeros(2), (np.zeros(2), np.zeros(2)))
        assert r2.holds
        for (_, _, b1), (_, _, b2) in zip(r1.checks, r2.checks):
            assert b2 == pytest.approx(10.0 * b1, rel=1e-12)


class TestWindowsAndRollout:
    def test_rollout_base_case_matches_window(self):
        spec = CellSpec("vanilla", 3, 2)
        rng = np.random.default_rng(14)
        params = init_params(spec, rng)
        x = rng.uniform(-1, 1, (4, 5, 2))
        tape = Tape()
        pv = {k: tape.leaf(v) for k, v in sorted(params.items())}
        one_step = tape.value(run_window(tape, spec, pv, x))
        roll = run_rollout(spec, params, x, 1)
        np.testing.assert_allclose(roll[:, 0], one_step, rtol=1e-12)

    def test_copy_model_rollout_constant(self):
        spec = CellSpec("vanilla", 2, 1)
        params = {k: np.zeros_like(v) for k, v in init_params(spec, np.random.default_rng(0)).items()}
        params["w_x"][:, 0] = 0.77  # constant predictor
        x = np.random.default_rng(15).uniform(-1, 1, (3, 4, 1))
        roll = run_rollout(spec, params, x, 4)
        np.testing.assert_allclose(roll, 0.77, rtol=1e-12)

    def test_rollout_rejects_bad_horizon(self):
        spec = CellSpec("vanilla", 2, 1)
        params = init_params(spec, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            run_rollout(spec, params, np.zeros((1, 2, 1)), 0)
