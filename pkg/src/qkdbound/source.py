"""Device model: encoding phases, side-channel weights and protocol probabilities.

Alice's qubit emission for setting j is cos(theta_j/2)|0_Z> + sin(theta_j/2)|1_Z>,
an XZ-plane state. Systematic state-preparation flaws shift the nominal phases
by the factor kappa = 1 + delta/pi, and per-round fluctuations keep the exact
phase inside [theta_hat_j - Delta, theta_hat_j + Delta]. Everything the bound
needs about side channels (Trojan-horse light, mode dependence, pulse
correlations) is collapsed into the single weight epsilon_u in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

from .gmath import as_unit

#: Setting labels in canonical order.
SETTINGS_BB84 = ("0Z", "1Z", "0X", "1X")
SETTINGS_THREE_STATE = ("0Z", "1Z", "0X")

#: Sectors within which the analytic corner bounds are valid
#: (a +-pi/6-style neighbourhood of each ideal phase).
ANALYTIC_SECTORS = {
    "0Z": (-math.pi / 6, math.pi / 6),
    "1Z": (5 * math.pi / 6, 7 * math.pi / 6),
    "0X": (math.pi / 3, 2 * math.pi / 3),
    "1X": (4 * math.pi / 3, 5 * math.pi / 3),
}


def qubit_bloch(theta: float) -> Tuple[float, float]:
    """XZ-plane Bloch vector (x, z) = (sin theta, cos theta) of the encoded qubit."""
    return (math.sin(theta), math.cos(theta))


def epsilon_effective(eps_prime: float, l_c: int) -> float:
    """Effective side-channel weight under length-l_c pulse correlations.

    epsilon_u = 1 - (1 - eps_prime)^(l_c + 1); reduces to eps_prime at l_c = 0.
    """
    if l_c < 0:
        raise ValueError("correlation length must be nonnegative")
    eps_prime = as_unit(eps_prime)
    return 1.0 - (1.0 - eps_prime) ** (l_c + 1)


def tha_epsilon_bound(nu_max: float) -> float:
    """Side-channel weight bound from the Trojan-horse output intensity nu_max.

    The mean photon number of the back-reflected light upper-bounds the
    deviation weight directly (worst case: single-photon back-reflection),
    capped at 1 since the weight is probability-like.
    """
    if nu_max < 0:
        raise ValueError("nu_max must be nonnegative")
    return min(nu_max, 1.0)


def combine_side_channels(eps_mode: float, eps_tha: float) -> float:
    """Total deviation weight of independent mode-dependence and THA channels.

    1 - (1 - eps_mode)(1 - eps_tha): the qubit component survives both.
    """
    eps_mode = as_unit(eps_mode)
    eps_tha = as_unit(eps_tha)
    return 1.0 - (1.0 - eps_mode) * (1.0 - eps_tha)


@dataclass(frozen=True)
class PhaseRanges:
    """Per-setting encoding-phase intervals [lo_j, hi_j] in radians."""

    lo: Dict[str, float]
    hi: Dict[str, float]

    def __post_init__(self):
        for j in self.lo:
            if self.lo[j] > self.hi[j]:
                raise ValueError(f"empty phase range for setting {j}")

    def settings(self) -> Tuple[str, ...]:
        return tuple(self.lo)

    def in_analytic_sectors(self) -> bool:
        """True when every interval sits inside its analytic-bound sector."""
        for j in self.lo:
            s_lo, s_hi = ANALYTIC_SECTORS[j]
            if self.lo[j] < s_lo - 1e-12 or self.hi[j] > s_hi + 1e-12:
                return False
        return True

    @classmethod
    def from_source(cls, spec: "SourceSpec",
                    settings: Tuple[str, ...] = SETTINGS_BB84) -> "PhaseRanges":
        """Ranges theta_hat_j +- Delta around the flawed nominal phases."""
        nominal = spec.nominal_phases()
        lo = {j: nominal[j] - spec.Delta for j in settings}
        hi = {j: nominal[j] + spec.Delta for j in settings}
        return cls(lo=lo, hi=hi)


@dataclass(frozen=True)
class SourceSpec:
    """Source imperfection parameters.

    delta: systematic phase deviation (radians), enters via kappa = 1 + delta/pi.
    Delta: half-width of the per-round phase fluctuation (radians).
    epsilon_u: side-channel weight upper bound, already composed from all
        side channels but *before* the correlation-length exponentiation.
    correlation_length: number of previous settings influencing a pulse (l_c).
    """

    delta: float = 0.0
    Delta: float = 0.0
    epsilon_u: float = 0.0
    correlation_length: int = 0

    def __post_init__(self):
        as_unit(self.epsilon_u)
        if self.correlation_length < 0:
            raise ValueError("correlation length must be nonnegative")
        if self.Delta < 0:
            raise ValueError("Delta must be nonnegative")

    @property
    def kappa(self) -> float:
        return 1.0 + self.delta / math.pi

    def nominal_phases(self) -> Dict[str, float]:
        """theta_hat = (0, kappa*pi, kappa*pi/2, kappa*3pi/2) for (0Z, 1Z, 0X, 1X)."""
        k = self.kappa
        return {
            "0Z": 0.0,
            "1Z": k * math.pi,
            "0X": k * math.pi / 2.0,
            "1X": k * 3.0 * math.pi / 2.0,
        }

    def effective_epsilon(self) -> float:
        """epsilon_u after the correlation-length penalty."""
        return epsilon_effective(self.epsilon_u, self.correlation_length)


@dataclass(frozen=True)
class ProtocolProbs:
    """Setting and basis probabilities of one protocol run."""

    p_za: float
    p_zb: float
    p_j: Dict[str, float]
    p_xa: float = field(init=False)
    p_xb: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p_xa", 1.0 - self.p_za)
        object.__setattr__(self, "p_xb", 1.0 - self.p_zb)
        for name, p in (("p_za", self.p_za), ("p_zb", self.p_zb)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability")
        total = sum(self.p_j.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"setting probabilities sum to {total}, expected 1")
        if abs(self.p_j.get("0Z", 0.0) - self.p_j.get("1Z", 0.0)) > 1e-12:
            raise ValueError("the two Z-basis settings must be equiprobable")

    @classmethod
    def uniform(cls, settings: Tuple[str, ...] = SETTINGS_BB84,
                p_za: float = 0.5, p_zb: float = 0.5) -> "ProtocolProbs":
        n = len(settings)
        return cls(p_za=p_za, p_zb=p_zb, p_j={j: 1.0 / n for j in settings})


def exact_virtual_prob(th0z: float, th1z: float, alpha: int) -> float:
    """Exact normalised virtual-state weight for given Z phases.

    pbar_alphaX = (1 + (-1)^alpha * cos((theta_0Z - theta_1Z)/2)) / 2,
    using <omega|omega'> = cos((theta - theta')/2) for XZ-plane states.
    """
    sign = 1.0 if alpha == 0 else -1.0
    return 0.5 * (1.0 + sign * math.cos((th0z - th1z) / 2.0))


def virtual_prob_bounds(ranges: PhaseRanges) -> Tuple[float, float]:
    """Worst-case normalised virtual probabilities over the Z phase ranges.

    Returns (pbar_1X_upper, pbar_0X_upper). The Z-basis prefactor p_ZA is
    divided out; the bound assembly only ever uses the ratio.
    """
    p1 = 0.5 * (1.0 - math.cos((ranges.lo["0Z"] - ranges.hi["1Z"]) / 2.0))
    p0 = 0.5 * (1.0 + math.cos((ranges.hi["0Z"] - ranges.lo["1Z"]) / 2.0))
    return (as_unit(p1), as_unit(p0))
