"""Assembly of the phase-error bound, per-tag variants and the secret-key rate.

The estimate of interest is an upper bound on the phase-error rate of the
virtual X-basis protocol, obtained from basis-mismatched detection statistics
through two layers of the G+ / G- sandwich:

  Y_inner(gamma, alpha) = sum_{j: c>0} c[alpha][j] * G+(q[j][gamma], z)
                        + sum_{j: c<0} c[alpha][j] * G-(q[j][gamma], z)
  y_outer = sum_alpha pbar[alpha] * Y_inner(1 - alpha, alpha)   (clamped to [0,1])
  e_ph^U  = G+(y_outer, z) / Y_Z,    z = sqrt(1 - epsilon_u)

and the key rate is R = max(0, Y_Z * [1 - h(e_ph^U) - f * h(e_bit)]).

The same assembly serves exact conditional probabilities (asymptotic mode)
and empirical counts (finite mode); no finite-size deviation terms are added,
finite mode exists to exercise estimator convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .coeffs import (
    CoefficientSet,
    coeff_bounds_bb84,
    coeff_bounds_three_state,
)
from .gmath import G_minus, G_plus, as_unit, binary_entropy
from .source import (
    PhaseRanges,
    ProtocolProbs,
    SETTINGS_BB84,
    SETTINGS_THREE_STATE,
    SourceSpec,
    virtual_prob_bounds,
)


class EmptySiftedKey(ValueError):
    """No detected Z-basis rounds; error rates are undefined."""


class InconsistentProtocol(ValueError):
    """Coefficient set and observed statistics disagree on the setting list."""


@dataclass(frozen=True)
class TagCounts:
    """Raw per-tag counts of one finite run (tag w = round index mod l_c+1)."""

    w: int
    n_w: int
    #: n_x[j] = (gamma=0 count, gamma=1 count) with Alice setting j, Bob in X
    n_x: Dict[str, Tuple[int, int]]
    n_det_z: int
    n_err_z: int


@dataclass(frozen=True)
class ObservedStatistics:
    """Conditional detection statistics of one run, exact or empirical.

    q[j] = (q_0, q_1) are estimates of P(Bob detects gamma | Alice sent j,
    Bob measured X), clamped into [0,1]. y_z is the Z-basis detection yield
    conditioned on both parties choosing Z, so the sifted-key size is
    N * p_ZA * p_ZB * y_z. ``n`` is None in asymptotic mode.
    """

    q: Dict[str, Tuple[float, float]]
    y_z: float
    e_bit: float
    n: Optional[int] = None
    n_det_z: Optional[int] = None
    per_tag: Optional[List[TagCounts]] = None

    def __post_init__(self):
        clamped = {j: (as_unit(q0, tol=1.0), as_unit(q1, tol=1.0))
                   for j, (q0, q1) in self.q.items()}
        object.__setattr__(self, "q", clamped)
        as_unit(self.e_bit)
        if not 0.0 <= self.y_z <= 1.0 + 1e-9:
            raise ValueError(f"y_z = {self.y_z} is not a probability")
        if self.per_tag is not None:
            if self.n is not None and sum(t.n_w for t in self.per_tag) != self.n:
                raise ValueError("per-tag round counts do not partition N")
            if (self.n_det_z is not None
                    and sum(t.n_det_z for t in self.per_tag) != self.n_det_z):
                raise ValueError("per-tag sifted counts do not sum to the total")

    @classmethod
    def from_counts(cls, n: int, n_x: Dict[str, Tuple[int, int]], n_det_z: int,
                    n_err_z: int, probs: ProtocolProbs,
                    per_tag: Optional[List[TagCounts]] = None
                    ) -> "ObservedStatistics":
        """Build clamped conditional estimates from raw counts.

        q[j][gamma] = N_{j,gammaX} / (N * p_j * p_XB); finite-sample noise can
        push the ratio above 1, so it is clamped (upward bias is safe: the
        outer bound is nondecreasing in every q).
        """
        q = {
            j: (
                min(1.0, n_x[j][0] / (n * probs.p_j[j] * probs.p_xb)),
                min(1.0, n_x[j][1] / (n * probs.p_j[j] * probs.p_xb)),
            )
            for j in n_x
        }
        # Alice's Z-basis probability is carried by the setting distribution
        p_zz = (probs.p_j["0Z"] + probs.p_j["1Z"]) * probs.p_zb
        y_z = min(1.0, n_det_z / (n * p_zz)) if n_det_z else 0.0
        e_bit = n_err_z / n_det_z if n_det_z else 0.0
        return cls(q=q, y_z=y_z, e_bit=e_bit, n=n, n_det_z=n_det_z,
                   per_tag=per_tag)


@dataclass(frozen=True)
class KeyRateReport:
    """Key-rate summary for one parameter point."""

    y_z: float
    e_bit: float
    e_ph_u: float
    rate: float
    f: float
    e_ph_u_per_tag: Optional[List[float]] = None


def _inner_detection_bound(q_gamma: Dict[str, float], coeffs: Dict[str, float],
                           z: float) -> float:
    """One virtual detection probability bounded through the sandwich."""
    total = 0.0
    for j, c in coeffs.items():
        if c > 0.0:
            total += c * G_plus(q_gamma[j], z)
        elif c < 0.0:
            total += c * G_minus(q_gamma[j], z)
    return total


def phase_error_bound(stats: ObservedStatistics, probs: ProtocolProbs,
                      c_upper: CoefficientSet,
                      pvir_upper: Tuple[float, float],
                      eps_u: float) -> float:
    """Upper bound e_ph^U on the phase-error rate of the sifted key.

    ``pvir_upper`` is (pbar_1X^U, pbar_0X^U), the normalised virtual-state
    probability bounds. Sound for any channel when ``c_upper`` and
    ``pvir_upper`` upper-bound the true decomposition.
    """
    if stats.y_z <= 0.0 or stats.n_det_z == 0:
        raise EmptySiftedKey("no detected Z-basis rounds")
    for j in c_upper.settings():
        if j not in stats.q:
            raise InconsistentProtocol(
                f"statistics lack setting {j} required by the {c_upper.protocol} "
                f"coefficient set")
    eps_u = as_unit(eps_u)
    z = math.sqrt(1.0 - eps_u)
    pbar_1x, pbar_0x = pvir_upper
    # phase error: virtual bit alpha with Bob's X outcome gamma = 1 - alpha
    q0 = {j: stats.q[j][0] for j in c_upper.settings()}
    q1 = {j: stats.q[j][1] for j in c_upper.settings()}
    y_outer = (pbar_1x * _inner_detection_bound(q0, c_upper.row(1), z)
               + pbar_0x * _inner_detection_bound(q1, c_upper.row(0), z))
    y_outer = min(1.0, max(0.0, y_outer))
    return min(1.0, G_plus(y_outer, z) / stats.y_z)


def per_tag_bounds(stats: ObservedStatistics, probs: ProtocolProbs,
                   c_upper: CoefficientSet, pvir_upper: Tuple[float, float],
                   eps_u: float) -> List[float]:
    """e_{ph,w}^U for every tag, from the per-tag counts."""
    if not stats.per_tag:
        raise ValueError("statistics carry no per-tag counts")
    out = []
    for tag in stats.per_tag:
        tag_stats = ObservedStatistics.from_counts(
            n=tag.n_w, n_x=tag.n_x, n_det_z=tag.n_det_z,
            n_err_z=tag.n_err_z, probs=probs)
        out.append(phase_error_bound(tag_stats, probs, c_upper, pvir_upper,
                                     eps_u))
    return out


def secret_fraction_check(e_per_tag: Sequence[float], q_w: Sequence[float],
                          e_ph_u: float) -> Tuple[float, float, float]:
    """The entropy averaging chain (lhs, mid, rhs); callers assert lhs<=mid<=rhs.

    lhs = sum_w q_w h(e_w), mid = h(sum_w q_w e_w), rhs = h(e_ph_u), where
    q_w are the tags' shares of the sifted key (must sum to 1).
    """
    if abs(sum(q_w) - 1.0) > 1e-9:
        raise ValueError("tag weights must sum to 1")
    lhs = sum(q * binary_entropy(e) for q, e in zip(q_w, e_per_tag))
    mid = binary_entropy(sum(q * e for q, e in zip(q_w, e_per_tag)))
    rhs = binary_entropy(e_ph_u)
    return (lhs, mid, rhs)


def key_rate(y_z: float, e_ph_u: float, e_bit: float, f: float,
             e_ph_u_per_tag: Optional[List[float]] = None) -> KeyRateReport:
    """R = max(0, Y_Z * [1 - h(e_ph^U) - f * h(e_bit)])."""
    if f < 1.0:
        raise ValueError("error-correction efficiency f must be >= 1")
    # h is symmetric about 1/2, so an error bound at or beyond 1/2 means the
    # corresponding cost is maximal, not h(e) evaluated past the peak
    h_ph = binary_entropy(min(e_ph_u, 0.5))
    h_bit = binary_entropy(min(e_bit, 0.5))
    r = y_z * (1.0 - h_ph - f * h_bit)
    return KeyRateReport(y_z=y_z, e_bit=e_bit, e_ph_u=e_ph_u,
                         rate=max(0.0, r), f=f,
                         e_ph_u_per_tag=e_ph_u_per_tag)


def bound_inputs_from_source(spec: SourceSpec, protocol: str
                             ) -> Tuple[CoefficientSet, Tuple[float, float], float]:
    """Worst-case coefficient bounds, virtual probabilities and effective
    epsilon for a characterised source — the inputs of phase_error_bound."""
    if protocol == "bb84":
        ranges = PhaseRanges.from_source(spec, settings=SETTINGS_BB84)
        c_upper = coeff_bounds_bb84(ranges)
    elif protocol == "three_state":
        ranges = PhaseRanges.from_source(spec, settings=SETTINGS_THREE_STATE)
        c_upper = coeff_bounds_three_state(ranges)
    else:
        raise InconsistentProtocol(f"unknown protocol {protocol!r}")
    pvir = virtual_prob_bounds(ranges)
    return c_upper, pvir, spec.effective_epsilon()


def evaluate_point(stats: ObservedStatistics, probs: ProtocolProbs,
                   spec: SourceSpec, protocol: str, f: float) -> KeyRateReport:
    """Full pipeline: source characterisation -> e_ph^U -> key rate."""
    c_upper, pvir, eps = bound_inputs_from_source(spec, protocol)
    e_ph = phase_error_bound(stats, probs, c_upper, pvir, eps)
    per_tag = (per_tag_bounds(stats, probs, c_upper, pvir, eps)
               if stats.per_tag else None)
    return key_rate(stats.y_z, e_ph, stats.e_bit, f, e_ph_u_per_tag=per_tag)
