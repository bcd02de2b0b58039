"""Honest-channel simulator and ground-truth oracle.

The channel model: Alice emits the nominal single-photon qubit for her chosen
setting; the line has transmittance eta = 10^(-loss_db/10) with all detector
inefficiency folded in; Bob uses two threshold detectors with independent
dark-count probability p_d per gate. The photon reaches detector gamma with
probability eta * q_gamma (q_gamma the Born probability of outcome gamma) or
is lost; exclusive clicks yield their bit, double clicks are assigned
1/2 - 1/2, and no click is a failure. Outcome probabilities are affine in the
input state, which keeps the honest channel inside the class of measurements
the decomposition bound is proven against.

Source imperfections (Delta fluctuations, side channels) deliberately do not
perturb the simulated data — they are small and enter the analysis only
through the bound's worst-case parameters, so the simulation plays the role
of the unknown honest channel the bound must dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .bounds import ObservedStatistics, TagCounts
from .source import ProtocolProbs, SETTINGS_BB84, SETTINGS_THREE_STATE, SourceSpec

#: Identifier recorded in output metadata so results declare their channel model.
CHANNEL_MODEL_ID = "single-photon-routing-darkcounts-v1"


@dataclass(frozen=True)
class ChannelParams:
    """Honest-channel parameters (system loss, dark counts, misalignment)."""

    loss_db: float
    p_d: float = 1e-8
    theta_mis: float = 0.0
    f: float = 1.16

    def __post_init__(self):
        if self.loss_db < 0:
            raise ValueError("loss must be nonnegative")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError("dark-count probability must be in [0, 1]")

    @property
    def eta(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)


@dataclass(frozen=True)
class RunConfig:
    """Finite-run parameters: rounds, seed, tagging period and protocol."""

    n: int
    seed: int
    l_c: int
    protocol: str  # "bb84" | "three_state"
    probs: ProtocolProbs

    def __post_init__(self):
        if self.n < self.l_c + 1:
            raise ValueError("need at least l_c + 1 rounds")

    def settings(self) -> Tuple[str, ...]:
        return SETTINGS_BB84 if self.protocol == "bb84" else SETTINGS_THREE_STATE


def detection_probs(theta_j: float, basis: str,
                    ch: ChannelParams) -> Tuple[float, float, float]:
    """(p_gamma0, p_gamma1, p_fail) for Bob measuring ``basis`` on the qubit.

    Born probabilities of the XZ-plane state cos(theta'/2)|0> + sin(theta'/2)|1>
    are (1 +- cos theta')/2 in Z and (1 +- sin theta')/2 in X, with
    theta' = theta_j + theta_mis.
    """
    theta = theta_j + ch.theta_mis
    if basis == "Z":
        q0 = (1.0 + math.cos(theta)) / 2.0
    elif basis == "X":
        q0 = (1.0 + math.sin(theta)) / 2.0
    else:
        raise ValueError(f"unknown basis {basis!r}")
    q1 = 1.0 - q0
    eta, pd = ch.eta, ch.p_d
    # detector gamma clicks if the photon reaches it or it dark-counts
    only0 = eta * q0 * (1.0 - pd) + (1.0 - eta) * pd * (1.0 - pd)
    only1 = eta * q1 * (1.0 - pd) + (1.0 - eta) * pd * (1.0 - pd)
    both = eta * pd + (1.0 - eta) * pd * pd
    p_fail = (1.0 - eta) * (1.0 - pd) ** 2
    return (only0 + 0.5 * both, only1 + 0.5 * both, p_fail)


def simulate_asymptotic(spec: SourceSpec, probs: ProtocolProbs,
                        ch: ChannelParams,
                        protocol: str = "bb84") -> ObservedStatistics:
    """Exact conditional detection statistics in the efficient-scheme limit.

    q[j] are X-basis outcome probabilities conditioned on setting j; y_z and
    e_bit come from Z emissions measured in Z. Basis-choice probabilities
    drop out of all conditionals, matching p_ZA, p_ZB -> 1.
    """
    settings = SETTINGS_BB84 if protocol == "bb84" else SETTINGS_THREE_STATE
    nominal = spec.nominal_phases()
    q = {}
    for j in settings:
        p0, p1, _ = detection_probs(nominal[j], "X", ch)
        q[j] = (p0, p1)
    y_z = 0.0
    wrong = 0.0
    for bit, j in enumerate(("0Z", "1Z")):
        p0, p1, p_fail = detection_probs(nominal[j], "Z", ch)
        y_z += 0.5 * (1.0 - p_fail)
        wrong += 0.5 * (p1 if bit == 0 else p0)
    e_bit = wrong / y_z if y_z > 0 else 0.0
    return ObservedStatistics(q=q, y_z=y_z, e_bit=e_bit)


def _outcome_table(settings: Tuple[str, ...], spec: SourceSpec,
                   ch: ChannelParams) -> np.ndarray:
    """Cumulative outcome thresholds, indexed [setting, basis(Z=0,X=1), edge]."""
    nominal = spec.nominal_phases()
    table = np.empty((len(settings), 2, 2))
    for si, j in enumerate(settings):
        for bi, basis in enumerate(("Z", "X")):
            p0, p1, _ = detection_probs(nominal[j], basis, ch)
            table[si, bi] = (p0, p0 + p1)
    return table


def simulate_finite(cfg: RunConfig, spec: SourceSpec,
                    ch: ChannelParams) -> ObservedStatistics:
    """Seeded Monte Carlo protocol run with per-tag bookkeeping.

    Round k gets tag w = k mod (l_c + 1); each round samples Alice's setting,
    Bob's basis and the detection outcome. Deterministic for a fixed
    (seed, config) pair. Returned statistics include per-tag counts.
    """
    settings = cfg.settings()
    n, n_tags = cfg.n, cfg.l_c + 1
    rng = np.random.default_rng(cfg.seed)
    p_j = np.array([cfg.probs.p_j[j] for j in settings])
    j_idx = rng.choice(len(settings), size=n, p=p_j)
    bob_x = rng.random(n) < cfg.probs.p_xb
    u = rng.random(n)

    table = _outcome_table(settings, spec, ch)
    edges = table[j_idx, bob_x.astype(int)]
    # outcome: 0, 1, or 2 (no detection)
    outcome = (u >= edges[:, 0]).astype(np.int64) + (u >= edges[:, 1])
    tags = np.arange(n) % n_tags

    i0z, i1z = settings.index("0Z"), settings.index("1Z")
    alice_z = (j_idx == i0z) | (j_idx == i1z)
    sent_bit = np.where(j_idx == i1z, 1, 0)
    sift = alice_z & ~bob_x & (outcome < 2)
    err = sift & (outcome != sent_bit)

    per_tag: List[TagCounts] = []
    for w in range(n_tags):
        in_tag = tags == w
        n_x: Dict[str, Tuple[int, int]] = {}
        for si, j in enumerate(settings):
            sel = in_tag & bob_x & (j_idx == si)
            n_x[j] = (int(np.count_nonzero(sel & (outcome == 0))),
                      int(np.count_nonzero(sel & (outcome == 1))))
        per_tag.append(TagCounts(
            w=w,
            n_w=int(np.count_nonzero(in_tag)),
            n_x=n_x,
            n_det_z=int(np.count_nonzero(sift & in_tag)),
            n_err_z=int(np.count_nonzero(err & in_tag)),
        ))

    totals = {j: (sum(t.n_x[j][0] for t in per_tag),
                  sum(t.n_x[j][1] for t in per_tag)) for j in settings}
    return ObservedStatistics.from_counts(
        n=n, n_x=totals,
        n_det_z=sum(t.n_det_z for t in per_tag),
        n_err_z=sum(t.n_err_z for t in per_tag),
        probs=cfg.probs, per_tag=per_tag)


def true_virtual_error_rate(spec: SourceSpec, ch: ChannelParams) -> float:
    """Exact phase-error rate of the virtual protocol on this honest channel.

    The virtual state for bit alpha is the normalised superposition
    (|0Z> + (-1)^alpha |1Z>)/norm of the nominal Z emissions; a phase error
    is Bob's X outcome disagreeing with alpha. Serves as the ground truth
    the computed upper bound must dominate.
    """
    nominal = spec.nominal_phases()
    th0, th1 = nominal["0Z"], nominal["1Z"]
    num = den = 0.0
    for alpha in (0, 1):
        sign = 1.0 if alpha == 0 else -1.0
        pbar = 0.5 * (1.0 + sign * math.cos((th0 - th1) / 2.0))
        if pbar <= 0.0:
            continue
        v = np.array([math.cos(th0 / 2), math.sin(th0 / 2)])
        v = v + sign * np.array([math.cos(th1 / 2), math.sin(th1 / 2)])
        theta_vir = 2.0 * math.atan2(v[1], v[0])
        p0, p1, p_fail = detection_probs(theta_vir, "X", ch)
        num += pbar * (p0 if alpha == 1 else p1)
        den += pbar * (1.0 - p_fail)
    return num / den if den > 0 else 0.0
