"""Acceptance suite: eleven end-to-end criteria, one pass/fail line each.

Each test prints a single "PASS criterion N" line on success; a pytest
failure marks the corresponding criterion as failed.
"""

import itertools
import json
import math

import numpy as np
import pytest

from qkdbound.bounds import (
    bound_inputs_from_source,
    evaluate_point,
    per_tag_bounds,
    phase_error_bound,
    secret_fraction_check,
)
from qkdbound.coeffs import (
    c0_0x,
    c0_0z,
    c0_1z,
    c1_0z,
    c1_1z,
    c1_x,
    coeff_bounds_bb84,
    coeff_bounds_three_state,
    coeffs_bb84,
    coeffs_three_state,
    solve_generic,
    state_triple,
    virtual_triple,
)
from qkdbound.cli import load_counts, main
from qkdbound.gmath import G_minus, G_plus
from qkdbound.simulator import (
    ChannelParams,
    RunConfig,
    simulate_asymptotic,
    simulate_finite,
    true_virtual_error_rate,
)
from qkdbound.source import (
    ANALYTIC_SECTORS,
    PhaseRanges,
    ProtocolProbs,
    SETTINGS_BB84,
    SETTINGS_THREE_STATE,
    SourceSpec,
    epsilon_effective,
    exact_virtual_prob,
    virtual_prob_bounds,
)

PROBS4 = ProtocolProbs.uniform(SETTINGS_BB84)
PROBS3 = ProtocolProbs.uniform(SETTINGS_THREE_STATE)


def _asymptotic_rate(protocol, spec, ch):
    probs = PROBS4 if protocol == "bb84" else PROBS3
    stats = simulate_asymptotic(spec, probs, ch, protocol=protocol)
    return evaluate_point(stats, probs, spec, protocol, ch.f)


def test_criterion_01_g_sandwich_oracle():
    """Two-sided sandwich holds for 1e5 random state/state/operator triples."""
    rng = np.random.default_rng(2024)
    n = 100_000

    def random_states(count):
        v = rng.normal(size=(count, 2)) + 1j * rng.normal(size=(count, 2))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    a = random_states(n)
    r = random_states(n)
    # random 2x2 operators with eigenvalues in [0, 1]: M = U diag(e) U^dag
    u = random_states(n)
    u_perp = np.stack([-np.conj(u[:, 1]), np.conj(u[:, 0])], axis=1)
    e = rng.uniform(0.0, 1.0, size=(n, 2))

    def expectation(s):
        o1 = np.abs(np.sum(np.conj(s) * u, axis=1)) ** 2
        o2 = np.abs(np.sum(np.conj(s) * u_perp, axis=1)) ** 2
        return e[:, 0] * o1 + e[:, 1] * o2

    y = expectation(a)
    target = expectation(r)
    z = np.abs(np.sum(np.conj(a) * r, axis=1))
    lo = G_minus(y, z)
    hi = G_plus(y, z)
    assert np.all(lo <= target + 1e-12)
    assert np.all(target <= hi + 1e-12)
    print("PASS criterion 1: G-sandwich oracle (1e5 triples)")


def test_criterion_02_coefficient_reconstruction():
    """1e4 in-sector tuples: residual < 1e-10 and closed forms match solver."""
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        ph = {j: rng.uniform(*ANALYTIC_SECTORS[j]) for j in SETTINGS_BB84}
        cs4 = coeffs_bb84(ph["0Z"], ph["1Z"], ph["0X"], ph["1X"])
        cs3 = coeffs_three_state(ph["0Z"], ph["1Z"], ph["0X"])
        for alpha, zeroed in ((1, "0X"), (0, "1X")):
            target = virtual_triple(ph["0Z"], ph["1Z"], alpha)
            recon4 = sum(cs4.c[alpha][j] * state_triple(ph[j])
                         for j in SETTINGS_BB84)
            recon3 = sum(cs3.c[alpha][j] * state_triple(ph[j])
                         for j in SETTINGS_THREE_STATE)
            assert np.max(np.abs(recon4 - target)) < 1e-10
            assert np.max(np.abs(recon3 - target)) < 1e-10
            sol = solve_generic(target, ph, zeroed=zeroed)
            assert all(abs(sol[j] - cs4.c[alpha][j]) < 1e-9
                       for j in SETTINGS_BB84)
            sol3 = solve_generic(target,
                                 {j: ph[j] for j in SETTINGS_THREE_STATE})
            assert all(abs(sol3[j] - cs3.c[alpha][j]) < 1e-9
                       for j in SETTINGS_THREE_STATE)
    print("PASS criterion 2: coefficient reconstruction (1e4 tuples)")


def test_criterion_03_bound_domination():
    """Corner-rule and virtual-probability bounds dominate 21-per-axis grids."""
    for delta in (0.063, 0.126):
        spec = SourceSpec(delta=delta, Delta=0.03)
        r4 = PhaseRanges.from_source(spec)
        g = {j: np.linspace(r4.lo[j], r4.hi[j], 21) for j in SETTINGS_BB84}
        m0, m1, mx0, mx1 = np.meshgrid(g["0Z"], g["1Z"], g["0X"], g["1X"],
                                       indexing="ij", sparse=True)
        b4 = coeff_bounds_bb84(r4)
        exact4 = {
            (1, "0Z"): c1_0z(m0, m1, mx1), (1, "1Z"): c1_1z(m0, m1, mx1),
            (1, "1X"): c1_x(m0, m1, mx1), (0, "0Z"): c0_0z(m0, m1, mx0),
            (0, "1Z"): c0_1z(m0, m1, mx0), (0, "0X"): c0_0x(m0, m1, mx0),
        }
        for (alpha, j), vals in exact4.items():
            assert float(np.max(vals)) <= b4.c[alpha][j] + 1e-12

        r3 = PhaseRanges.from_source(spec, settings=SETTINGS_THREE_STATE)
        b3 = coeff_bounds_three_state(r3)
        exact3 = {
            (1, "0Z"): c1_0z(m0, m1, mx0), (1, "1Z"): c1_1z(m0, m1, mx0),
            (1, "0X"): c1_x(m0, m1, mx0), (0, "0Z"): c0_0z(m0, m1, mx0),
            (0, "1Z"): c0_1z(m0, m1, mx0), (0, "0X"): c0_0x(m0, m1, mx0),
        }
        for (alpha, j), vals in exact3.items():
            assert float(np.max(vals)) <= b3.c[alpha][j] + 1e-12

        p1u, p0u = virtual_prob_bounds(r4)
        for t0 in g["0Z"]:
            for t1 in g["1Z"]:
                assert exact_virtual_prob(t0, t1, 1) <= p1u + 1e-12
                assert exact_virtual_prob(t0, t1, 0) <= p0u + 1e-12
    print("PASS criterion 3: bound domination over 21-per-axis grids")


def test_criterion_04_honest_channel_soundness():
    """e_ph^U dominates the true virtual error rate over the whole grid."""
    for loss, delta, eps in itertools.product(
            range(0, 51, 10), (0.0, 0.063, 0.126), (0.0, 1e-6, 1e-3)):
        spec = SourceSpec(delta=delta, Delta=0.03, epsilon_u=eps)
        ch = ChannelParams(loss_db=float(loss))
        truth = true_virtual_error_rate(spec, ch)
        for protocol in ("bb84", "three_state"):
            rep = _asymptotic_rate(protocol, spec, ch)
            assert rep.e_ph_u >= truth - 1e-15, \
                f"unsound at loss={loss} delta={delta} eps={eps} {protocol}"
    print("PASS criterion 4: honest-channel soundness (54-point grid)")


def test_criterion_05_ideal_limit_exactness():
    """Perfect source and detectors: zero phase error, R = Y_Z = eta."""
    spec = SourceSpec()  # delta = Delta = epsilon_u = 0
    for loss in (0.0, 10.0, 20.0):
        ch = ChannelParams(loss_db=loss, p_d=0.0)
        rep = _asymptotic_rate("bb84", spec, ch)
        eta = 10 ** (-loss / 10)
        assert rep.e_ph_u <= 1e-9
        assert abs(rep.rate - eta) < 1e-9
        assert abs(rep.y_z - eta) < 1e-9
    print("PASS criterion 5: ideal-limit exactness at 0/10/20 dB")


def test_criterion_06_rate_curve_shape():
    """Curves ordered by epsilon, nonincreasing in loss, cutoff below 80 dB."""
    eps_list = (0.0, 1e-6, 1e-4, 1e-3)
    losses = np.arange(0.0, 81.0, 5.0)
    curves = []
    for eps in eps_list:
        spec = SourceSpec(delta=0.063, Delta=0.03, epsilon_u=eps)
        rates = [_asymptotic_rate("bb84", spec, ChannelParams(l)).rate
                 for l in losses]
        assert all(a >= b - 1e-15 for a, b in zip(rates, rates[1:])), \
            f"curve not nonincreasing at eps={eps}"
        assert max(rates) > 0, f"no positive region at eps={eps}"
        assert rates[-1] == 0.0, f"no cutoff below 80 dB at eps={eps}"
        curves.append(rates)
    for hi_curve, lo_curve in zip(curves, curves[1:]):
        for r_small, r_big in zip(hi_curve, lo_curve):
            if r_big > 0:
                assert r_small > r_big, "rates not strictly ordered by epsilon"
            else:
                assert r_small >= 0
    print("PASS criterion 6: rate-vs-loss curve shape and epsilon ordering")


def test_criterion_07_protocol_ordering():
    """Four-state rate dominates three-state; delta curves stay within 2x."""
    losses = np.arange(0.0, 61.0, 5.0)
    for eps, delta in itertools.product((1e-6, 1e-3), (0.063, 0.126)):
        spec = SourceSpec(delta=delta, Delta=0.03, epsilon_u=eps)
        r4 = [_asymptotic_rate("bb84", spec, ChannelParams(l)).rate
              for l in losses]
        r3 = [_asymptotic_rate("three_state", spec, ChannelParams(l)).rate
              for l in losses]
        assert all(a >= b - 1e-15 for a, b in zip(r4, r3)), \
            f"three-state beat bb84 at eps={eps} delta={delta}"
        cut4 = max((l for l, r in zip(losses, r4) if r > 0), default=-1)
        cut3 = max((l for l, r in zip(losses, r3) if r > 0), default=-1)
        assert cut4 >= cut3
    for eps in (1e-6, 1e-3):
        for l in losses:
            pair = []
            for delta in (0.063, 0.126):
                spec = SourceSpec(delta=delta, Delta=0.03, epsilon_u=eps)
                pair.append(_asymptotic_rate("bb84", spec,
                                             ChannelParams(l)).rate)
            if min(pair) > 0:
                assert max(pair) / min(pair) < 2.0
    print("PASS criterion 7: protocol ordering and SPF robustness")


def test_criterion_08_entropy_averaging_chain():
    """Per-tag entropy chain holds for finite tagged runs."""
    for l_c, seed in ((1, 11), (1, 12), (2, 11), (2, 12)):
        spec = SourceSpec(delta=0.063, Delta=0.03, epsilon_u=1e-6,
                          correlation_length=l_c)
        cfg = RunConfig(n=10 ** 6, seed=seed, l_c=l_c, protocol="bb84",
                        probs=PROBS4)
        stats = simulate_finite(cfg, spec, ChannelParams(10.0))
        c_u, pvir, eps = bound_inputs_from_source(spec, "bb84")
        e_agg = phase_error_bound(stats, PROBS4, c_u, pvir, eps)
        e_tags = per_tag_bounds(stats, PROBS4, c_u, pvir, eps)
        q_w = [t.n_det_z / stats.n_det_z for t in stats.per_tag]
        lhs, mid, rhs = secret_fraction_check(e_tags, q_w, e_agg)
        assert lhs <= mid + 1e-12
        assert mid <= rhs + 1e-12
        assert 0.0 < e_agg < 0.5
    print("PASS criterion 8: entropy averaging chain (l_c in {1,2}, N=1e6)")


def test_criterion_09_correlation_penalty():
    """Longer correlations strictly inflate epsilon and never help the rate."""
    for eps_prime in (1e-6, 1e-4, 1e-2):
        vals = [epsilon_effective(eps_prime, lc) for lc in range(5)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
    for loss in (0.0, 10.0, 20.0):
        for eps_prime in (1e-6, 1e-3):
            rates = []
            for l_c in (0, 1):
                spec = SourceSpec(delta=0.063, Delta=0.03,
                                  epsilon_u=eps_prime, correlation_length=l_c)
                rates.append(_asymptotic_rate("bb84", spec,
                                              ChannelParams(loss)).rate)
            assert rates[1] <= rates[0] + 1e-15
    print("PASS criterion 9: correlation-length penalty")


def test_criterion_10_finite_asymptotic_convergence():
    """1e7-round runs sit within 5 binomial sigma of the exact statistics."""
    spec = SourceSpec(delta=0.063, Delta=0.03)
    ch = ChannelParams(10.0)
    exact = simulate_asymptotic(spec, PROBS4, ch)
    for seed in (1, 2, 3):
        cfg = RunConfig(n=10 ** 7, seed=seed, l_c=0, protocol="bb84",
                        probs=PROBS4)
        fin = simulate_finite(cfg, spec, ch)
        for j in fin.q:
            for gamma in (0, 1):
                p = exact.q[j][gamma]
                n_eff = cfg.n * PROBS4.p_j[j] * PROBS4.p_xb
                sd = max(math.sqrt(p * (1 - p) / n_eff), 1e-12)
                assert abs(fin.q[j][gamma] - p) < 5 * sd, \
                    f"seed {seed}, cell ({j},{gamma}) beyond 5 sigma"
    print("PASS criterion 10: finite/asymptotic convergence (3 seeds, N=1e7)")


def test_criterion_11_end_to_end_determinism(tmp_path):
    """simulate -> serialize -> bound replays bit-identically."""
    out = tmp_path / "counts.json"
    argv = ["simulate", "--loss-db", "10", "--n", "300000", "--seed", "424242",
            "--lc", "2", "--epsilon-u", "1e-6", "--out", str(out)]
    assert main(argv) == 0
    out2 = tmp_path / "counts2.json"
    assert main(argv[:-1] + [str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()

    spec = SourceSpec(delta=0.063, Delta=0.03, epsilon_u=1e-6,
                      correlation_length=2)
    cfg = RunConfig(n=300_000, seed=424242, l_c=2, protocol="bb84",
                    probs=PROBS4)
    direct = simulate_finite(cfg, spec, ChannelParams(10.0))
    in_proc = evaluate_point(direct, PROBS4, spec, "bb84", 1.16)
    _, replay_stats, replay_probs = load_counts(str(out))
    assert replay_stats == direct
    replayed = evaluate_point(replay_stats, replay_probs, spec, "bb84", 1.16)
    assert replayed == in_proc
    print("PASS criterion 11: end-to-end determinism and replay")
