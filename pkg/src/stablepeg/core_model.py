"""Stablecoin designs, economy functions, redemption values and user payoffs.

The four designs differ only in the redemption value ``v`` a user receives per
coin handed back to the system:

    Fiat    1 if Q <= V_f else V_f / Q
    Crypto  r(Q, theta) if Q <= V_c(theta) else r(Q, theta) * V_c(theta) / Q
    Algo    r(Q, theta)
    Over    r(Q, theta) * o(theta) if D_L(theta) > 0 or the user is a good debtor, else 0

``r`` is the ratio between the collateral price users realise and the price
the system's oracle assumes. Only the ratio is modelled, never the two prices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np

from .errors import (
    InvalidParameter,
    InvalidQ,
    MonotonicityViolation,
    SupplyConsistencyViolation,
)

# absolute tolerance for equality tests in branch selection
TOL = 1e-12
SUPPLY_TOL = 1e-9
GRID_POINTS = 100


class Design(str, Enum):
    FIAT_FULL = "FiatFull"
    FIAT_PARTIAL = "FiatPartial"
    CRYPTO = "Crypto"
    ALGO = "Algo"
    OVER = "Over"

    @property
    def is_fiat(self) -> bool:
        return self in (Design.FIAT_FULL, Design.FIAT_PARTIAL)

    @classmethod
    def parse(cls, text: str) -> "Design":
        for d in cls:
            if d.value.lower() == str(text).strip().lower():
                return d
        raise InvalidParameter(f"unknown design {text!r}; expected one of {[d.value for d in cls]}")


class Action(str, Enum):
    SELL = "Sell"
    REDEEM = "Redeem"
    HOLD = "Hold"


@dataclass(frozen=True)
class StablecoinSpec:
    design: Design
    total_supply: float
    fiat_reserve: float | None = None
    collateral: str = "c"

    def __post_init__(self):
        if not isinstance(self.design, Design):
            object.__setattr__(self, "design", Design.parse(self.design))
        if not self.total_supply > 0:
            raise InvalidParameter("total_supply must be > 0")
        if self.design.is_fiat:
            if self.fiat_reserve is None or self.fiat_reserve < 0:
                raise InvalidParameter("fiat designs need fiat_reserve >= 0")
            if self.design is Design.FIAT_FULL and self.fiat_reserve < self.total_supply:
                raise InvalidParameter("FiatFull requires fiat_reserve >= total_supply")
            if self.design is Design.FIAT_PARTIAL and not 0 < self.fiat_reserve < self.total_supply:
                raise InvalidParameter("FiatPartial requires 0 < fiat_reserve < total_supply")


@dataclass(frozen=True)
class UserContext:
    Q: float = 0.0
    is_good_debtor: bool = False


@dataclass(frozen=True)
class FutureBelief:
    """Point belief about the future market supply and redemption value."""

    M_prime: float
    v_prime: float


@dataclass(frozen=True)
class EconomyFunctions:
    """The abstract model functions as concrete callables.

    All callables accept floats or numpy arrays. ``debtor_debt`` is the debt of
    one good debtor; ``n_debtors`` of them share the supply not under liquidation.
    """

    total_supply: float
    theta_min: float
    theta_max: float
    price_fn: Callable[[Any], Any]
    no_intervention_price: Callable[[Any], Any]
    incentive_fn: Callable[[Any], Any]
    ratio_fn: Callable[[Any, Any], Any]
    reserve_value: Callable[[Any], Any]
    collateralization: Callable[[Any], Any]
    liquidation_demand: Callable[[Any], Any]
    debtor_debt: Callable[[Any], Any]
    n_debtors: int = 1
    params: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def check_theta(self, theta: float) -> float:
        if not (self.theta_min - TOL <= theta <= self.theta_max + TOL):
            raise InvalidParameter(f"theta={theta} outside [{self.theta_min}, {self.theta_max}]")
        return float(theta)

    def theta_grid(self, points: int = GRID_POINTS) -> np.ndarray:
        return np.linspace(self.theta_min, self.theta_max, points)


# -- parametric families ---------------------------------------------------


def _linear_price(T, beta):
    return lambda M: 1.0 - beta * np.asarray(M, dtype=float) / T


def _linear_e(theta_min, theta_max, e_min, e_max):
    span = theta_max - theta_min
    return lambda th: e_min + (e_max - e_min) * (np.asarray(th, dtype=float) - theta_min) / span


def _ratio_linear(T, alpha):
    return lambda Q, th: np.asarray(th, dtype=float) * (1.0 - alpha * np.asarray(Q, dtype=float) / T)


def _ratio_exponential(T, k):
    return lambda Q, th: np.asarray(th, dtype=float) * np.exp(-k * np.asarray(Q, dtype=float) / T)


def _liquidation_ramp(T, theta_min, theta_l):
    def demand(th):
        frac = (theta_l - np.asarray(th, dtype=float)) / (theta_l - theta_min)
        return T * np.clip(frac, 0.0, 1.0)

    return demand


DEFAULTS: dict[str, dict[str, Any]] = {
    "price": {"family": "linear", "beta": 0.1},
    "e": {"family": "linear", "min": 0.6, "max": 0.9},
    "incentive": {"family": "linear", "rate": 0.0},
    "r_c": {"family": "linear", "alpha": 0.5},
    "reserve": {"family": "linear"},  # v0 defaults to 1.2 * total_supply
    "collateral": {"family": "linear", "o0": 1.25},
    "liquidation": {"family": "ramp", "theta_l": 1.2, "n_debtors": 10},
}


def _section(config: Mapping[str, Any], name: str) -> dict[str, Any]:
    merged = dict(DEFAULTS[name])
    merged.update(config.get(name, {}) or {})
    return merged


def _family(section: dict, name: str, allowed: tuple[str, ...]) -> str:
    fam = str(section.get("family", allowed[0])).lower()
    if fam not in allowed:
        raise InvalidParameter(f"economy.{name}.family={fam!r} not in {allowed}")
    return fam


def make_economy(config: Mapping[str, Any], total_supply: float, theta_min: float, theta_max: float) -> EconomyFunctions:
    """Assemble an :class:`EconomyFunctions` without validating it."""
    T = float(total_supply)
    if not theta_min < theta_max:
        raise InvalidParameter(f"theta_min={theta_min} must be < theta_max={theta_max}")

    price = _section(config, "price")
    _family(price, "price", ("linear",))
    beta = float(price["beta"])
    if not 0 < beta <= 1:
        raise InvalidParameter(f"economy.price.beta={beta} must lie in (0, 1]")

    e = _section(config, "e")
    _family(e, "e", ("linear",))
    e_min, e_max = float(e["min"]), float(e["max"])

    inc = _section(config, "incentive")
    _family(inc, "incentive", ("linear",))
    rate = float(inc["rate"])
    if rate < 0:
        raise InvalidParameter(f"economy.incentive.rate={rate} must be >= 0")

    rc = _section(config, "r_c")
    fam = _family(rc, "r_c", ("linear", "exponential"))
    if fam == "linear":
        ratio = _ratio_linear(T, float(rc["alpha"]))
    else:
        ratio = _ratio_exponential(T, float(rc["k"]))

    res = _section(config, "reserve")
    _family(res, "reserve", ("linear",))
    v0 = float(res.get("v0", 1.2 * T))

    col = _section(config, "collateral")
    _family(col, "collateral", ("linear",))
    o0 = float(col["o0"])

    liq = _section(config, "liquidation")
    _family(liq, "liquidation", ("ramp",))
    theta_l = float(liq["theta_l"])
    n_debtors = int(liq["n_debtors"])
    if not theta_l > theta_min:
        raise InvalidParameter(f"economy.liquidation.theta_l={theta_l} must exceed theta_min")
    if n_debtors < 1:
        raise InvalidParameter("economy.liquidation.n_debtors must be >= 1")
    demand = _liquidation_ramp(T, theta_min, theta_l)

    params = {
        "price": price, "e": e, "incentive": inc, "r_c": rc,
        "reserve": {**res, "v0": v0}, "collateral": col, "liquidation": liq,
    }
    return EconomyFunctions(
        total_supply=T,
        theta_min=float(theta_min),
        theta_max=float(theta_max),
        price_fn=_linear_price(T, beta),
        no_intervention_price=_linear_e(theta_min, theta_max, e_min, e_max),
        incentive_fn=lambda x: (1.0 + rate) * np.asarray(x, dtype=float),
        ratio_fn=ratio,
        reserve_value=lambda th: v0 * np.asarray(th, dtype=float),
        collateralization=lambda th: np.maximum(0.0, o0 * np.asarray(th, dtype=float)),
        liquidation_demand=demand,
        debtor_debt=lambda th: (T - demand(th)) / n_debtors,
        n_debtors=n_debtors,
        params=params,
    )


def _monotone(name, xs, ys, *, increasing, strict):
    d = np.diff(ys) if increasing else -np.diff(ys)
    bad = d <= 0 if strict else d < -TOL
    if not np.any(bad):
        return None
    if strict:
        kind = "strictly increasing" if increasing else "strictly decreasing"
    else:
        kind = "nondecreasing" if increasing else "nonincreasing"
    return MonotonicityViolation(name, f"not {kind}", [float(xs[i]) for i in np.flatnonzero(bad)])


def economy_problems(econ: EconomyFunctions, points: int = GRID_POINTS) -> list[Exception]:
    """Every invariant violation found on ``points``-point grids."""
    T = econ.total_supply
    th = econ.theta_grid(points)
    qs = np.linspace(0.0, T, points)
    out: list[Exception | None] = []

    p = np.broadcast_to(econ.price_fn(qs), qs.shape)
    out.append(_monotone("price_fn", qs, p, increasing=False, strict=True))
    if np.any(p > 1 + TOL) or np.any(p < 0):
        out.append(MonotonicityViolation("price_fn", "must lie in [0, 1]", qs[(p > 1 + TOL) | (p < 0)]))

    e = np.broadcast_to(econ.no_intervention_price(th), th.shape)
    out.append(_monotone("no_intervention_price", th, e, increasing=True, strict=True))
    if np.any(e >= 1) or np.any(e <= 0):
        out.append(MonotonicityViolation("no_intervention_price", "must lie in (0, 1)", th[(e >= 1) | (e <= 0)]))

    xs = np.linspace(0.0, 2.0, points)
    i = np.broadcast_to(econ.incentive_fn(xs), xs.shape)
    out.append(_monotone("incentive_fn", xs, i, increasing=True, strict=False))
    if np.any(i < xs - TOL):
        out.append(MonotonicityViolation("incentive_fn", "must satisfy i(x) >= x", xs[i < xs - TOL]))

    for t in (econ.theta_min, 0.5 * (econ.theta_min + econ.theta_max), econ.theta_max):
        r = np.broadcast_to(econ.ratio_fn(qs, t), qs.shape)
        out.append(_monotone(f"ratio_fn(Q, theta={t:g})", qs, r, increasing=False, strict=False))
        if np.any(r <= 0):
            out.append(MonotonicityViolation("ratio_fn", "must be > 0", qs[r <= 0]))
    for q in (0.0, 0.5 * T, T):
        r = np.broadcast_to(econ.ratio_fn(q, th), th.shape)
        out.append(_monotone(f"ratio_fn(Q={q:g}, theta)", th, r, increasing=True, strict=True))

    vc = np.broadcast_to(econ.reserve_value(th), th.shape)
    out.append(_monotone("reserve_value", th, vc, increasing=True, strict=True))
    if np.any(vc < 0):
        out.append(MonotonicityViolation("reserve_value", "must be >= 0", th[vc < 0]))

    o = np.broadcast_to(econ.collateralization(th), th.shape)
    out.append(_monotone("collateralization", th, o, increasing=True, strict=False))
    if np.any(o < 0):
        out.append(MonotonicityViolation("collateralization", "must be >= 0", th[o < 0]))

    dl = np.broadcast_to(econ.liquidation_demand(th), th.shape)
    du = np.broadcast_to(econ.debtor_debt(th), th.shape)
    out.append(_monotone("liquidation_demand", th, dl, increasing=False, strict=False))
    out.append(_monotone("debtor_debt", th, du, increasing=True, strict=False))
    for name, arr in (("liquidation_demand", dl), ("debtor_debt", du)):
        if np.any(arr < -TOL) or np.any(arr > T + TOL):
            out.append(MonotonicityViolation(name, "must lie in [0, total_supply]", th[(arr < -TOL) | (arr > T + TOL)]))
    gap = np.abs(dl + econ.n_debtors * du - T)
    if np.any(gap > SUPPLY_TOL):
        worst = int(np.argmax(gap))
        out.append(SupplyConsistencyViolation(
            f"D_L + sum(D_u) != total_supply (off by {gap[worst]:.3g} at theta={th[worst]:g})"))
    return [x for x in out if x is not None]


def validate_economy(econ: EconomyFunctions, points: int = GRID_POINTS) -> EconomyFunctions:
    problems = economy_problems(econ, points)
    if problems:
        raise problems[0]
    return econ


def build_economy(config: Mapping[str, Any], total_supply: float, theta_min: float, theta_max: float) -> EconomyFunctions:
    """Build the parametric economy and verify every invariant on a 100-point grid."""
    return validate_economy(make_economy(config, total_supply, theta_min, theta_max))


# -- redemption value and payoff -------------------------------------------


def reserve_capacity(spec: StablecoinSpec, econ: EconomyFunctions, theta: float) -> float:
    """Coins the system can honour before its reserves run dry (inf when unlimited)."""
    if spec.design.is_fiat:
        return float(spec.fiat_reserve)
    if spec.design is Design.CRYPTO:
        return float(econ.reserve_value(theta))
    return math.inf


def _check_Q(spec: StablecoinSpec, Q: float) -> float:
    if Q < -TOL or Q > spec.total_supply + TOL:
        raise InvalidQ(f"Q={Q} outside [0, {spec.total_supply}]")
    return min(max(float(Q), 0.0), spec.total_supply)


def redemption_value(spec: StablecoinSpec, econ: EconomyFunctions, theta: float, ctx: UserContext) -> float:
    """Value paid per redeemed coin for ``spec.design``."""
    Q = _check_Q(spec, ctx.Q)
    design = spec.design
    if design.is_fiat:
        reserve = spec.fiat_reserve
        return 1.0 if Q <= reserve + TOL else reserve / Q
    r = float(econ.ratio_fn(Q, theta))
    if design is Design.ALGO:
        return r
    if design is Design.CRYPTO:
        reserve = float(econ.reserve_value(theta))
        return r if Q <= reserve + TOL else r * reserve / Q
    liquidating = float(econ.liquidation_demand(theta)) > TOL
    if liquidating or ctx.is_good_debtor:
        return r * float(econ.collateralization(theta))
    return 0.0


def hold_value(econ: EconomyFunctions, p_future: float, v_future: float) -> float:
    """max{i(p'), i(v')}; equals i(max{p', v'}) because i is nondecreasing."""
    return float(max(econ.incentive_fn(p_future), econ.incentive_fn(v_future)))


def payoff(
    action: Action,
    spec: StablecoinSpec,
    econ: EconomyFunctions,
    theta: float,
    M: float,
    future: FutureBelief,
    ctx: UserContext,
) -> float:
    T = spec.total_supply
    for name, m in (("M", M), ("M'", future.M_prime)):
        if m < -TOL or m > T + TOL:
            raise InvalidParameter(f"{name}={m} outside [0, {T}]")
    action = Action(action)
    if action is Action.SELL:
        return float(econ.price_fn(M))
    if action is Action.REDEEM:
        return redemption_value(spec, econ, theta, ctx)
    return hold_value(econ, float(econ.price_fn(future.M_prime)), future.v_prime)
