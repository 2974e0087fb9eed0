"""Closed-form throughput scaling laws for hybrid ad hoc networks.

A hybrid network has n source-destination pairs of wireless nodes assisted
by m = n^beta base stations, each with l = n^gamma antennas, all wired to a
central processor over backhaul links of rate R_BS = n^eta.  Everything in
this module is a pure function of the four exponents (alpha, beta, gamma,
eta): scheme exponents, the achievable/upper-bound throughput exponent,
operating-regime labels, the minimum backhaul exponent that preserves
throughput, and the DoF/infrastructure limitation flags.

Scalar entry points validate their inputs; the ``*_grid`` variants accept
numpy arrays (broadcast together) and are used for dense sweeps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

INF = float("inf")
NEG_INF = float("-inf")

#: Finite-difference step used by the DoF-limitation sensitivity probe.
SENSITIVITY_DELTA = 1e-6

#: Deterministic priority used to resolve exact exponent ties.  Higher wins,
#: so ties on regime boundaries are attributed to the scheme that is best on
#: the high-alpha side of the boundary (IMH beats ISH beats MH beats HC).
SCHEME_PRIORITY = {"IMH": 3, "ISH": 2, "MH": 1, "HC": 0}

SCHEMES = ("MH", "HC", "ISH", "IMH")

REGIMES_2D = ("A", "B", "C", "D")
REGIMES_3D = ("A", "B", "C", "D", "B~", "D~")


class InvalidPointError(ValueError):
    """The operating point violates alpha > 2, beta/gamma range, or beta+gamma <= 1."""


# ---------------------------------------------------------------------------
# Operating point and per-scheme exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingPoint:
    """Operating point (alpha, beta, gamma, eta).

    alpha : path-loss exponent, must exceed 2.
    beta  : base-station count exponent, m = n^beta, in [0, 1).
    gamma : per-BS antenna count exponent, l = n^gamma, in [0, 1).
    eta   : backhaul rate exponent, R_BS = n^eta.  +inf means unlimited
            backhaul, -inf means zero-rate backhaul.
    """

    alpha: float
    beta: float = 0.0
    gamma: float = 0.0
    eta: float = INF

    def __post_init__(self) -> None:
        if not (self.alpha > 2.0) or math.isinf(self.alpha) or math.isnan(self.alpha):
            raise InvalidPointError(f"alpha must be a finite number > 2, got {self.alpha}")
        if not (0.0 <= self.beta < 1.0):
            raise InvalidPointError(f"beta must lie in [0, 1), got {self.beta}")
        if not (0.0 <= self.gamma < 1.0):
            raise InvalidPointError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.beta + self.gamma > 1.0:
            raise InvalidPointError(
                f"beta + gamma must not exceed 1, got {self.beta} + {self.gamma}"
            )
        if math.isnan(self.eta):
            raise InvalidPointError("eta must be a real number or +-inf, got nan")

    def with_eta(self, eta: float) -> "ScalingPoint":
        return ScalingPoint(self.alpha, self.beta, self.gamma, eta)


@dataclass(frozen=True)
class SchemeExponents:
    """The five exponents every throughput comparison is built from."""

    mh: float
    hc: float
    ish_raw: float
    imh_raw: float
    backhaul_cap: float


# The elementary exponent formulas.  All higher-level code (scalar, grid and
# alpha-interval evaluation) must go through these so that equal quantities
# are computed by the identical floating-point expression.

def _e_mh() -> float:
    return 0.5


def _e_hc(alpha):
    return 2.0 - alpha / 2.0


def _e_ish_raw(alpha, beta, gamma):
    return 1.0 + gamma - alpha * (1.0 - beta) / 2.0


def _e_imh_bg(beta, gamma):
    return beta + gamma


def _e_imh_half(beta):
    # (1 + beta) / 2, written as beta + (1 - beta)/2 so it is bit-identical
    # to the backhaul cap beta + eta* in the regime where eta* = (1 - beta)/2.
    return beta + (1.0 - beta) / 2.0


def _e_cap(beta, eta):
    return beta + eta


def scheme_exponents(p: ScalingPoint) -> SchemeExponents:
    """Exponents of the four schemes plus the backhaul cap at point ``p``.

    mh is constant 1/2; hc = 2 - alpha/2; ish_raw = 1 + gamma -
    alpha*(1-beta)/2 is the uncapped one-hop-to-BS exponent; imh_raw =
    min(beta+gamma, (1+beta)/2) is the uncapped BS-assisted multihop
    exponent; backhaul_cap = beta + eta is what m backhaul links of rate
    n^eta can carry.
    """
    return SchemeExponents(
        mh=_e_mh(),
        hc=_e_hc(p.alpha),
        ish_raw=_e_ish_raw(p.alpha, p.beta, p.gamma),
        imh_raw=min(_e_imh_bg(p.beta, p.gamma), _e_imh_half(p.beta)),
        backhaul_cap=_e_cap(p.beta, p.eta),
    )


# ---------------------------------------------------------------------------
# Achievable exponent and matching upper bound
# ---------------------------------------------------------------------------

def _attribute_infra(ish_raw: float, imh_raw: float) -> str:
    # The infrastructure branch (capped or not) is credited to the scheme
    # with the larger raw exponent; IMH wins raw ties because it is the
    # scheme that remains best as alpha grows.
    return "IMH" if imh_raw >= ish_raw else "ISH"


def achievable_exponent(p: ScalingPoint) -> tuple[float, str]:
    """Best throughput exponent at ``p`` and the scheme achieving it.

    The exponent is max{min{max{ish_raw, imh_raw}, beta+eta}, 1/2, 2-alpha/2}.
    Exact ties are resolved by SCHEME_PRIORITY, so each boundary value
    belongs to the scheme that is best just above it in alpha.
    """
    se = scheme_exponents(p)
    infra_raw = max(se.ish_raw, se.imh_raw)
    infra = min(infra_raw, se.backhaul_cap)
    e = max(infra, se.mh, se.hc)
    if infra == e:
        scheme = _attribute_infra(se.ish_raw, se.imh_raw)
    elif se.mh == e:
        scheme = "MH"
    else:
        scheme = "HC"
    return e, scheme


def upper_bound_exponent(p: ScalingPoint) -> float:
    """Cut-set upper bound on the throughput exponent at ``p``.

    Evaluated as the minimum over the two network cuts: the wireless cut
    caps the exponent at max{ish_raw, imh_raw, 1/2, 2-alpha/2} and the
    backhaul cut at max{beta+eta, 1/2, 2-alpha/2}.  Both trees only select
    among already-computed values, so the min/max lattice identity makes
    this equal to achievable_exponent(p) bit-for-bit.
    """
    se = scheme_exponents(p)
    adhoc = max(se.mh, se.hc)
    wireless_cut = max(se.ish_raw, se.imh_raw, adhoc)
    backhaul_cut = max(se.backhaul_cap, adhoc)
    return min(wireless_cut, backhaul_cut)


def _achievable_unchecked(alpha: float, beta: float, gamma: float, eta: float) -> float:
    # Same tree as achievable_exponent but without domain validation; used
    # for the sensitivity probes which may step just outside the domain.
    infra_raw = max(_e_ish_raw(alpha, beta, gamma),
                    min(_e_imh_bg(beta, gamma), _e_imh_half(beta)))
    return max(min(infra_raw, _e_cap(beta, eta)), _e_mh(), _e_hc(alpha))


# ---------------------------------------------------------------------------
# Vectorized variants for dense sweeps
# ---------------------------------------------------------------------------

def achievable_exponent_grid(alpha, beta, gamma, eta):
    """Vectorized achievable exponent; inputs broadcast like numpy arrays.

    No validation is performed; callers are expected to feed valid points.
    Uses the same elementary float expressions as the scalar version.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ish = 1.0 + gamma - alpha * (1.0 - beta) / 2.0
    imh = np.minimum(beta + gamma, beta + (1.0 - beta) / 2.0)
    infra = np.minimum(np.maximum(ish, imh), beta + eta)
    return np.maximum(np.maximum(infra, 0.5), 2.0 - alpha / 2.0)


def upper_bound_exponent_grid(alpha, beta, gamma, eta):
    """Vectorized cut-set bound, composed as min(wireless cut, backhaul cut)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ish = 1.0 + gamma - alpha * (1.0 - beta) / 2.0
    imh = np.minimum(beta + gamma, beta + (1.0 - beta) / 2.0)
    adhoc = np.maximum(0.5, 2.0 - alpha / 2.0)
    wireless_cut = np.maximum(np.maximum(ish, imh), adhoc)
    backhaul_cut = np.maximum(beta + eta, adhoc)
    return np.minimum(wireless_cut, backhaul_cut)


SCHEME_CODES = {"MH": 0, "HC": 1, "ISH": 2, "IMH": 3}
SCHEME_NAMES = {v: k for k, v in SCHEME_CODES.items()}


def best_scheme_grid(alpha, beta, gamma, eta):
    """Vectorized (exponent, scheme code) with the scalar tie-break rules.

    Scheme codes follow SCHEME_CODES.  Used by regime sweeps where calling
    the scalar function per point would be too slow.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ish = 1.0 + gamma - alpha * (1.0 - beta) / 2.0
    imh = np.minimum(beta + gamma, beta + (1.0 - beta) / 2.0)
    infra = np.minimum(np.maximum(ish, imh), beta + eta)
    hc = 2.0 - alpha / 2.0
    e = np.maximum(np.maximum(infra, 0.5), hc)
    infra_scheme = np.where(imh >= ish, SCHEME_CODES["IMH"], SCHEME_CODES["ISH"])
    scheme = np.where(
        infra == e,
        infra_scheme,
        np.where(e == 0.5, SCHEME_CODES["MH"], SCHEME_CODES["HC"]),
    )
    return e, scheme


# ---------------------------------------------------------------------------
# Operating-regime classification
# ---------------------------------------------------------------------------

def _check_range(beta: float, gamma: float) -> None:
    if not (0.0 <= beta < 1.0) or not (0.0 <= gamma < 1.0) or beta + gamma > 1.0:
        raise InvalidPointError(f"invalid (beta, gamma) = ({beta}, {gamma})")


def classify_regime_2d(beta: float, gamma: float) -> str:
    """Regime label A/B/C/D for unlimited backhaul, from (beta, gamma) only.

    A:  beta + gamma < 1/2 (infrastructure never beats pure ad hoc).
    B:  beta + gamma >= 1/2 and beta + 2*gamma < 1 (antenna-limited IMH).
    D:  beta + 2*gamma >= 1 and gamma >= (beta^2 - 3*beta + 2)/2 (an ISH
        window opens between the HC and IMH segments).
    C:  the rest (IMH plateau (1+beta)/2, no ISH window).
    """
    _check_range(beta, gamma)
    if beta + gamma < 0.5:
        return "A"
    if beta + 2.0 * gamma < 1.0:
        return "B"
    if gamma >= 0.5 * (beta * beta - 3.0 * beta + 2.0):
        return "D"
    return "C"


def _label_3d(beta: float, gamma: float, eta: float) -> str:
    """Resolve the 3-D regime label; case split on eta, bullets in order."""
    if eta == INF:
        return classify_regime_2d(beta, gamma)
    if eta < -0.5:
        # Backhaul so weak that BS-assisted schemes never reach the MH line.
        return "A"
    if eta < 0.0:
        return "A" if beta < 0.5 - eta else "B~"
    if eta < 0.5:
        if beta + gamma < 0.5:
            return "A"
        if gamma > eta and beta < 1.0 - 2.0 * eta:
            # Capped IMH plateau beta+eta; below the MH line it is useless.
            return "A" if beta < 0.5 - eta else "B~"
        if gamma < eta and beta + 2.0 * gamma < 1.0:
            return "B"
        if (beta + 2.0 * gamma >= 1.0 and beta >= 1.0 - 2.0 * eta
                and gamma >= beta * beta + (eta - 2.0) * beta + 1.0):
            return "D~"
        return classify_regime_2d(beta, gamma)
    if eta < 1.0:
        if gamma >= beta * beta + (eta - 2.0) * beta + 1.0:
            return "D~"
        return classify_regime_2d(beta, gamma)
    # eta >= 1: the cap beta+eta exceeds every raw exponent.
    return classify_regime_2d(beta, gamma)


# ---------------------------------------------------------------------------
# Alpha breakpoints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaInterval:
    """One segment [alpha_min, alpha_max) of the best-scheme piecewise law.

    The first interval of a regime is open at alpha_min = 2 (alpha > 2 by
    assumption); every other interval is closed at its left endpoint.
    """

    alpha_min: float
    alpha_max: float
    scheme: str
    formula: str
    _eval: Callable[[float], float] = field(repr=False, compare=False)

    def exponent_at(self, alpha: float) -> float:
        return self._eval(alpha)

    def contains(self, alpha: float) -> bool:
        return self.alpha_min <= alpha < self.alpha_max

    def to_dict(self) -> dict:
        return {
            "alpha_min": self.alpha_min,
            "alpha_max": self.alpha_max,
            "scheme": self.scheme,
            "formula": self.formula,
        }


def _interval(lo, hi, scheme, formula, fn) -> AlphaInterval:
    return AlphaInterval(lo, hi, scheme, formula, _eval=fn)


def _breakpoints(label: str, beta: float, gamma: float, eta: float) -> tuple[AlphaInterval, ...]:
    """Piecewise best-scheme segments of (2, inf) for a resolved label."""
    hc = lambda a: _e_hc(a)
    mh = lambda a: _e_mh()
    imh = lambda a: min(_e_imh_bg(beta, gamma), _e_imh_half(beta))
    ish = lambda a: _e_ish_raw(a, beta, gamma)
    cap = lambda a: _e_cap(beta, eta)

    if label == "A":
        segs = [(2.0, 3.0, "HC", "2 - alpha/2", hc),
                (3.0, INF, "MH", "1/2", mh)]
    elif label == "B":
        x = 4.0 - 2.0 * beta - 2.0 * gamma
        segs = [(2.0, x, "HC", "2 - alpha/2", hc),
                (x, INF, "IMH", "beta + gamma", imh)]
    elif label == "C":
        x = 3.0 - beta
        segs = [(2.0, x, "HC", "2 - alpha/2", hc),
                (x, INF, "IMH", "(1 + beta)/2", imh)]
    elif label == "D":
        x1 = 2.0 * (1.0 - gamma) / beta
        x2 = 1.0 + 2.0 * gamma / (1.0 - beta)
        segs = [(2.0, x1, "HC", "2 - alpha/2", hc),
                (x1, x2, "ISH", "1 + gamma - alpha*(1 - beta)/2", ish),
                (x2, INF, "IMH", "(1 + beta)/2", imh)]
    elif label == "B~":
        x = 4.0 - 2.0 * beta - 2.0 * eta
        segs = [(2.0, x, "HC", "2 - alpha/2", hc),
                (x, INF, "IMH", "beta + eta", cap)]
    elif label == "D~":
        x1 = 4.0 - 2.0 * beta - 2.0 * eta
        x2 = 2.0 + 2.0 * (gamma - eta) / (1.0 - beta)
        x3 = 1.0 + 2.0 * gamma / (1.0 - beta)
        segs = [(2.0, x1, "HC", "2 - alpha/2", hc),
                (x1, x2, "ISH", "beta + eta", cap),
                (x2, x3, "ISH", "1 + gamma - alpha*(1 - beta)/2", ish),
                (x3, INF, "IMH", "(1 + beta)/2", imh)]
    else:  # pragma: no cover - labels are produced internally
        raise ValueError(f"unknown regime label {label!r}")

    kept = []
    for lo, hi, scheme, formula, fn in segs:
        lo = max(lo, 2.0)
        if hi <= lo:
            continue  # segment pushed out of the alpha > 2 range
        kept.append((lo, hi, scheme, formula, fn))
    # Stitch neighbours so the intervals tile (2, inf) with no gaps even if
    # an inner segment degenerated to a point.
    out = []
    for k, (lo, hi, scheme, formula, fn) in enumerate(kept):
        if k + 1 < len(kept):
            hi = kept[k + 1][0]
        out.append(_interval(lo, hi, scheme, formula, fn))
    return tuple(out)


# ---------------------------------------------------------------------------
# Regime report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeReport:
    """Classification of an operating point plus its piecewise law in alpha."""

    label2d: str
    label3d: str
    alpha_breakpoints: tuple[AlphaInterval, ...]
    best_scheme: str | None = None
    exponent: float | None = None
    dof_limited: bool | None = None
    infra_limited: bool | None = None

    def interval_at(self, alpha: float) -> AlphaInterval:
        for seg in self.alpha_breakpoints:
            if seg.contains(alpha):
                return seg
        raise ValueError(f"alpha={alpha} outside (2, inf)")

    def to_dict(self) -> dict:
        return {
            "label2d": self.label2d,
            "label3d": self.label3d,
            "alpha_breakpoints": [seg.to_dict() for seg in self.alpha_breakpoints],
            "best_scheme": self.best_scheme,
            "exponent": self.exponent,
            "dof_limited": self.dof_limited,
            "infra_limited": self.infra_limited,
        }


def classify_regime_3d(beta: float, gamma: float, eta: float,
                       alpha: float | None = None) -> RegimeReport:
    """Full regime report from (beta, gamma, eta), optionally at a query alpha.

    Without ``alpha`` only the labels and breakpoints are filled in; with it
    the report also carries the best scheme, exponent and limitation flags
    at that alpha.
    """
    _check_range(beta, gamma)
    if math.isnan(eta):
        raise InvalidPointError("eta must be a real number or +-inf, got nan")
    label3d = _label_3d(beta, gamma, eta)
    label2d = classify_regime_2d(beta, gamma)
    report = RegimeReport(
        label2d=label2d,
        label3d=label3d,
        alpha_breakpoints=_breakpoints(label3d, beta, gamma, eta),
    )
    if alpha is None:
        return report
    p = ScalingPoint(alpha, beta, gamma, eta)
    e, scheme = achievable_exponent(p)
    flags = limitation_flags(p)
    return RegimeReport(
        label2d=label2d,
        label3d=label3d,
        alpha_breakpoints=report.alpha_breakpoints,
        best_scheme=scheme,
        exponent=e,
        dof_limited=flags.dof_limited,
        infra_limited=flags.infra_limited,
    )


# ---------------------------------------------------------------------------
# Minimum backhaul exponent and limitation flags
# ---------------------------------------------------------------------------

def min_backhaul_exponent(beta: float, gamma: float) -> float:
    """Smallest eta that preserves the unlimited-backhaul exponent at all alpha.

    Regime A needs no backhaul at all (-inf).  In B the bottleneck is the
    per-BS antenna count (gamma); in C it is the (1-beta)/2 parallel-path
    plateau; in D the ISH segment peaks at alpha = 2(1-gamma)/beta, giving
    gamma - (1-beta)(1-beta-gamma)/beta.
    """
    regime = classify_regime_2d(beta, gamma)
    if regime == "A":
        return NEG_INF
    if regime == "B":
        return gamma
    if regime == "C":
        return (1.0 - beta) / 2.0
    # Regime D requires beta > 0: at beta = 0 the D condition
    # gamma >= (beta^2 - 3 beta + 2)/2 = 1 cannot hold for gamma < 1.
    if beta <= 0.0:  # pragma: no cover - unreachable by classification
        raise InvalidPointError("regime D with beta = 0 should be impossible")
    return gamma - (1.0 - beta) * (1.0 - beta - gamma) / beta


@dataclass(frozen=True)
class LimitationFlags:
    dof_limited: bool
    infra_limited: bool


def limitation_flags(p: ScalingPoint) -> LimitationFlags:
    """Whether the exponent at ``p`` is backhaul-capped and/or DoF-sensitive.

    infra_limited: the exponent strictly improves when eta -> inf.
    dof_limited: an infrastructure scheme is best and nudging beta or gamma
    up by SENSITIVITY_DELTA strictly raises the exponent (the probe skips
    validation, so points on the domain edge still get a well-defined flag).
    """
    e, scheme = achievable_exponent(p)
    e_inf, _ = achievable_exponent(p.with_eta(INF))
    infra_limited = e < e_inf
    dof_limited = False
    if scheme in ("ISH", "IMH"):
        up_beta = _achievable_unchecked(p.alpha, p.beta + SENSITIVITY_DELTA, p.gamma, p.eta)
        up_gamma = _achievable_unchecked(p.alpha, p.beta, p.gamma + SENSITIVITY_DELTA, p.eta)
        dof_limited = up_beta > e or up_gamma > e
    return LimitationFlags(dof_limited=dof_limited, infra_limited=infra_limited)


# ---------------------------------------------------------------------------
# Finite-n realization of an operating point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteNMapping:
    """Concrete (m, l, R_BS) for a finite network of n nodes."""

    n: int
    m: int
    l: int
    r_bs: float
    l_clipped: bool = False


def map_finite_n(n: int, p: ScalingPoint) -> FiniteNMapping:
    """Realize (m, l, R_BS) for n nodes at operating point ``p``.

    m = round(n^beta) pushed down to the nearest perfect square so the BSs
    form a square grid; l = max(1, round(n^gamma)); R_BS = n^eta with eta
    = -inf mapping to 0 and +inf to math.inf.  If m*l would exceed n, l is
    clipped to n // m and a warning is emitted.
    """
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    m = math.isqrt(round(float(n) ** p.beta)) ** 2
    if m >= n:  # only reachable for beta pushing n^beta up to n itself
        m = math.isqrt(n - 1) ** 2
        warnings.warn(f"m reduced to {m} to keep m < n", stacklevel=2)
    l = max(1, round(float(n) ** p.gamma))
    clipped = False
    if m * l > n:
        l = max(1, n // m)
        clipped = True
        warnings.warn(
            f"l clipped to {l} so that m*l <= n (m={m}, n={n})", stacklevel=2
        )
    if p.eta == NEG_INF:
        r_bs = 0.0
    elif p.eta == INF:
        r_bs = INF
    else:
        r_bs = float(n) ** p.eta
    return FiniteNMapping(n=n, m=m, l=l, r_bs=r_bs, l_clipped=clipped)
