"""Theta thresholds and equilibrium-zone classification.

Zones over the fundamental state theta:

* UniquePeg: price 1 is the only equilibrium.
* SelfFulfilling: several equilibria including the peg; beliefs pick one.
* DepegOnly: no equilibrium at price 1.

For Crypto and Algo designs the bands are cut by ``theta_bar`` (r(T, theta) = 1)
and ``theta_under`` (r(0, theta) = 1). Over-collateralised designs never get a
UniquePeg band; their ``theta_under`` solves r(0, theta) * o(theta) = 1.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .core_model import (
    TOL,
    Design,
    EconomyFunctions,
    FutureBelief,
    StablecoinSpec,
    UserContext,
    redemption_value,
)
from .errors import AssumptionViolated, InvalidParameter, NoRoot
from .rootfind import bisect_increasing, last_true


class Zone(str, Enum):
    UNIQUE_PEG = "UniquePeg"
    SELF_FULFILLING = "SelfFulfilling"
    DEPEG_ONLY = "DepegOnly"

    @property
    def rank(self) -> int:
        return {"DepegOnly": 0, "SelfFulfilling": 1, "UniquePeg": 2}[self.value]


@dataclass(frozen=True)
class ZoneReport:
    design: Design
    theta_bar: float | None
    theta_under: float | None
    theta_circ: float | None
    theta_star: float | None
    grid: tuple[tuple[float, Zone], ...] = field(default_factory=tuple)

    def zones(self) -> list[Zone]:
        return [z for _, z in self.grid]

    def is_monotone(self) -> bool:
        ranks = [z.rank for z in self.zones()]
        return all(a <= b for a, b in zip(ranks, ranks[1:]))


@dataclass(frozen=True)
class EquilibriumPoint:
    price: float
    M_star: float
    kind: str  # "Peg" or "Depeg"
    supporting_belief: str

    def __post_init__(self):
        if (self.kind == "Peg") != (abs(self.price - 1.0) <= TOL):
            raise ValueError(f"kind={self.kind} inconsistent with price={self.price}")


@dataclass(frozen=True)
class PegConditions:
    sufficient_holds: bool
    necessary_holds: bool


# -- peg conditions ----------------------------------------------------------


def peg_conditions(v, v_future, p_now, p_future, incentive=lambda x: x) -> tuple[bool, bool]:
    """The two sufficient conditions for a unique, reachable peg at one state.

    first: max{v, i(v'), i(p')} > p whenever p < 1
    second: max{v, i(v'), i(p')} >= 1 whenever p = 1
    """
    best = max(v, float(incentive(v_future)), float(incentive(p_future)))
    pegged = p_now >= 1.0 - TOL
    first = pegged or best > p_now
    second = (not pegged) or best >= 1.0 - TOL
    return first, second


def check_peg_conditions(
    spec: StablecoinSpec,
    econ: EconomyFunctions,
    theta: float,
    M: float | None = None,
    future: FutureBelief | None = None,
    ctx: UserContext | None = None,
    *,
    m_points: int = 50,
    q_points: int = 50,
) -> PegConditions:
    """Evaluate both conditions over a grid of market supplies M.

    Without ``ctx`` every redemption belief Q on a ``q_points`` grid is tried
    and Over users are taken as non-debtors, the weakest position. Without
    ``future`` the future state is the current one: v' = v and p(M') = p(M).
    """
    theta = econ.check_theta(theta)
    T = spec.total_supply
    ms = [float(M)] if M is not None else list(np.linspace(0.0, T, m_points))
    if ctx is not None:
        contexts = [ctx]
    else:
        contexts = [UserContext(Q=float(q)) for q in np.linspace(0.0, T, q_points)]
    values = [redemption_value(spec, econ, theta, c) for c in contexts]
    sufficient = necessary = True
    for m in ms:
        p_now = float(econ.price_fn(m))
        for v in values:
            if future is None:
                v_f, p_f = v, p_now
            else:
                v_f, p_f = future.v_prime, float(econ.price_fn(future.M_prime))
            first, second = peg_conditions(v, v_f, p_now, p_f, econ.incentive_fn)
            if not first:
                necessary = sufficient = False
            elif not second:
                sufficient = False
    return PegConditions(sufficient, necessary)


# -- thresholds --------------------------------------------------------------


def _require(spec: StablecoinSpec, allowed: tuple[Design, ...], op: str):
    if spec.design not in allowed:
        raise InvalidParameter(f"{op} is undefined for design {spec.design.value}")


def solve_theta_bar(spec: StablecoinSpec, econ: EconomyFunctions) -> float:
    """theta with r(T, theta) = 1; theta_min when r(T, theta_min) >= 1 already."""
    _require(spec, (Design.CRYPTO, Design.ALGO), "theta_bar")
    T = spec.total_supply
    try:
        return bisect_increasing(lambda t: econ.ratio_fn(T, t), econ.theta_min, econ.theta_max, 1.0,
                                 what="r(T, theta) = 1")
    except NoRoot as exc:
        if exc.side == "high":
            return econ.theta_min
        raise


def solve_theta_under(spec: StablecoinSpec, econ: EconomyFunctions) -> float:
    """theta with r(0, theta) = 1 (Crypto, Algo) or r(0, theta) * o(theta) = 1 (Over)."""
    _require(spec, (Design.CRYPTO, Design.ALGO, Design.OVER), "theta_under")
    if spec.design is Design.OVER:
        f, what = (lambda t: econ.ratio_fn(0.0, t) * econ.collateralization(t)), "r(0, theta) * o(theta) = 1"
    else:
        f, what = (lambda t: econ.ratio_fn(0.0, t)), "r(0, theta) = 1"
    try:
        return bisect_increasing(f, econ.theta_min, econ.theta_max, 1.0, what=what)
    except NoRoot as exc:
        if exc.side == "high":
            return econ.theta_min
        raise


def solve_theta_circ(spec: StablecoinSpec, econ: EconomyFunctions) -> float | None:
    """Crypto: V_c(theta) = T. Over: largest theta with D_L(theta) = T."""
    _require(spec, (Design.CRYPTO, Design.OVER), "theta_circ")
    T = spec.total_supply
    if spec.design is Design.CRYPTO:
        try:
            return bisect_increasing(econ.reserve_value, econ.theta_min, econ.theta_max, T, what="V_c(theta) = T")
        except NoRoot as exc:
            return econ.theta_min if exc.side == "high" else None
    return last_true(lambda t: float(econ.liquidation_demand(t)) >= T - 1e-9, econ.theta_min, econ.theta_max)


def solve_theta_star(spec: StablecoinSpec, econ: EconomyFunctions) -> float | None:
    """Over: theta with r(T, theta) * o(theta) = 1."""
    _require(spec, (Design.OVER,), "theta_star")
    T = spec.total_supply
    try:
        return bisect_increasing(lambda t: econ.ratio_fn(T, t) * econ.collateralization(t),
                                 econ.theta_min, econ.theta_max, 1.0, what="r(T, theta) * o(theta) = 1")
    except NoRoot as exc:
        return econ.theta_min if exc.side == "high" else None


def _optional(solver, spec, econ):
    try:
        return solver(spec, econ)
    except NoRoot:
        return None


def _crypto_cutoffs(spec, econ) -> tuple[float, float]:
    """(theta_bar, theta_under) with +inf standing for "never reached"."""
    bar = _optional(solve_theta_bar, spec, econ)
    under = _optional(solve_theta_under, spec, econ)
    return (math.inf if bar is None else bar), (math.inf if under is None else under)


def _check_over_assumption(spec, econ, points: int = 100):
    T = spec.total_supply
    for t in econ.theta_grid(points):
        if float(econ.liquidation_demand(t)) >= T - 1e-9:
            value = float(econ.ratio_fn(0.0, t) * econ.collateralization(t))
            if value >= 1.0:
                raise AssumptionViolated(
                    "Over: r(0, theta) * o(theta) < 1 whenever D_L(theta) = T",
                    f"r(0)*o = {value:.6g} at theta = {t:.6g}")


def classify(spec: StablecoinSpec, econ: EconomyFunctions, theta: float) -> Zone:
    theta = econ.check_theta(theta)
    design = spec.design
    if design is Design.FIAT_FULL:
        return Zone.UNIQUE_PEG
    if design is Design.FIAT_PARTIAL:
        return Zone.SELF_FULFILLING
    if design in (Design.CRYPTO, Design.ALGO):
        bar, under = _crypto_cutoffs(spec, econ)
        if design is Design.CRYPTO and math.isfinite(under):
            reserve = float(econ.reserve_value(under))
            if reserve < spec.total_supply - TOL:
                raise AssumptionViolated("Crypto: V_c(theta_under) >= T",
                                         f"V_c({under:.6g}) = {reserve:.6g} < {spec.total_supply:g}")
        if theta >= bar:
            return Zone.UNIQUE_PEG
        if theta >= under:
            return Zone.SELF_FULFILLING
        return Zone.DEPEG_ONLY

    _check_over_assumption(spec, econ)
    # Non-debtors can only be paid while liquidations run. If liquidations run
    # while every redemption still pays >= 1, the peg would be unique, which
    # the Over zone structure rules out.
    T = spec.total_supply
    if float(econ.liquidation_demand(theta)) > TOL and float(econ.ratio_fn(T, theta) * econ.collateralization(theta)) >= 1.0:
        raise AssumptionViolated(
            "Over: D_L(theta) = 0 wherever r(T, theta) * o(theta) >= 1",
            f"liquidation still active at theta = {theta:.6g}")
    under = _optional(solve_theta_under, spec, econ)
    if under is not None and theta >= under:
        return Zone.SELF_FULFILLING
    return Zone.DEPEG_ONLY


def zone_diagram(spec: StablecoinSpec, econ: EconomyFunctions, theta_grid: Sequence[float],
                 workers: int | None = None) -> ZoneReport:
    grid = [float(t) for t in theta_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidParameter("theta grid must be sorted ascending")
    design = spec.design
    bar = under = circ = star = None
    if design is Design.FIAT_FULL:
        bar = econ.theta_min
    elif design in (Design.CRYPTO, Design.ALGO):
        bar = _optional(solve_theta_bar, spec, econ)
        under = _optional(solve_theta_under, spec, econ)
        if design is Design.CRYPTO:
            circ = solve_theta_circ(spec, econ)
    elif design is Design.OVER:
        under = _optional(solve_theta_under, spec, econ)
        circ = solve_theta_circ(spec, econ)
        star = solve_theta_star(spec, econ)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            zones = list(pool.map(lambda t: classify(spec, econ, t), grid))
    else:
        zones = [classify(spec, econ, t) for t in grid]
    return ZoneReport(design, bar, under, circ, star, tuple(zip(grid, zones)))


# -- belief-dependent equilibria ---------------------------------------------


def market_supply_at(econ: EconomyFunctions, price: float) -> float:
    """M with p(M) = price, clipped to [0, T]."""
    T = econ.total_supply
    if price >= float(econ.price_fn(0.0)):
        return 0.0
    if price <= float(econ.price_fn(T)):
        return T
    return bisect_increasing(lambda m: -float(econ.price_fn(m)), 0.0, T, -price, what="p(M) = price")


def _point(econ, price: float, tag: str) -> EquilibriumPoint:
    if price >= 1.0 - TOL:
        return EquilibriumPoint(1.0, 0.0, "Peg", tag)
    return EquilibriumPoint(float(price), market_supply_at(econ, price), "Depeg", tag)


def equilibrium_prices(spec: StablecoinSpec, econ: EconomyFunctions, theta: float, expected_Q: float) -> list[EquilibriumPoint]:
    """Equilibria consistent with users' shared belief about redemption demand."""
    zone = classify(spec, econ, theta)
    T = spec.total_supply
    q = min(max(float(expected_Q), 0.0), T)
    e = float(econ.no_intervention_price(theta))
    design = spec.design

    if design is Design.FIAT_FULL:
        return [_point(econ, 1.0, "any belief")]
    if design is Design.FIAT_PARTIAL:
        if q <= spec.fiat_reserve + TOL:
            return [_point(econ, 1.0, "low-Q belief")]
        return [_point(econ, e, "high-Q belief: reserves depleted")]

    if design is Design.OVER:
        ro = float(econ.ratio_fn(q, theta) * econ.collateralization(theta))
        if zone is Zone.SELF_FULFILLING:
            star = solve_theta_star(spec, econ)
            if star is not None and theta >= star:
                if q > TOL:
                    return [_point(econ, 1.0, "debtors expected to redeem")]
                return [_point(econ, e, "debtors expected to hold")]
            if ro >= 1.0:
                return [_point(econ, 1.0, "low-Q belief")]
            return [_point(econ, max(e, ro), "high-Q belief")]
        if float(econ.ratio_fn(0.0, theta) * econ.collateralization(theta)) <= e:
            return [_point(econ, e, "r(0)*o <= e")]
        return [_point(econ, ro if ro > e else e, "low-Q belief" if ro > e else "high-Q belief")]

    v = redemption_value(spec, econ, theta, UserContext(Q=q))
    if zone is Zone.UNIQUE_PEG:
        return [_point(econ, 1.0, "any belief")]
    if zone is Zone.SELF_FULFILLING:
        if v >= 1.0 - TOL:
            return [_point(econ, 1.0, "low-Q belief")]
        return [_point(econ, max(e, v), "high-Q belief")]
    if float(econ.ratio_fn(0.0, theta)) <= e:
        return [_point(econ, e, "r(0) <= e")]
    if design is Design.CRYPTO:
        circ = solve_theta_circ(spec, econ)
        if circ is not None and theta < circ:
            if q < float(econ.reserve_value(theta)) and v > e:
                return [_point(econ, v, "low-Q belief (reserves short of supply)")]
            return [_point(econ, e, "high-Q belief: reserves exhausted")]
    if v > e:
        return [_point(econ, v, "low-Q belief")]
    return [_point(econ, e, "high-Q belief")]
