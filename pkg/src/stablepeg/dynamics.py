"""Brute-force N-agent oracle and a step simulator for redemption cascades.

Agents hold equal slices of the circulating supply and pick Sell, Redeem or
Hold. Redemption demand seen by the system is the *exit pressure*: coins
redeemed plus coins sold, since coins dumped in a run end up with buyers who
redeem them. Holding pays the better of the expected future price and the
expected future redemption value, where the future price is capped by the
current price and floored by the no-intervention price e(theta).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .core_model import (
    TOL,
    Action,
    Design,
    EconomyFunctions,
    StablecoinSpec,
    UserContext,
    redemption_value,
    reserve_capacity,
)
from .equilibrium import EquilibriumPoint, Zone
from .errors import InvalidParameter, NonConvergence

MAX_ENUM_N = 24
DEFAULT_MAX_ITER = 1000

# preference order for ties
_TIE_ORDER = (Action.HOLD, Action.REDEEM, Action.SELL)


class Role(str, Enum):
    PLAIN = "Plain"
    GOOD_DEBTOR = "GoodDebtor"


@dataclass
class AgentPopulation:
    N: int
    holdings: np.ndarray
    roles: list[Role]
    actions: list[Action]

    def __post_init__(self):
        if self.N <= 0:
            raise InvalidParameter("N must be > 0")
        self.holdings = np.asarray(self.holdings, dtype=float)
        if not (len(self.holdings) == len(self.roles) == len(self.actions) == self.N):
            raise InvalidParameter("holdings, roles and actions need one entry per agent")
        self.roles = [Role(r) for r in self.roles]
        self.actions = [Action(a) for a in self.actions]

    @classmethod
    def uniform(cls, N: int, supply: float, action: Action = Action.HOLD, n_debtors: int = 0) -> "AgentPopulation":
        """N equal holders; the first ``n_debtors`` agents are good debtors."""
        if not 0 <= n_debtors <= N:
            raise InvalidParameter(f"n_debtors={n_debtors} must lie in [0, N]")
        holdings = np.full(N, supply / N)
        roles = [Role.GOOD_DEBTOR] * n_debtors + [Role.PLAIN] * (N - n_debtors)
        return cls(N, holdings, roles, [Action(action)] * N)

    @property
    def supply(self) -> float:
        return float(self.holdings.sum())

    def count(self, action: Action) -> int:
        return sum(1 for a in self.actions if a is action)

    def copy(self) -> "AgentPopulation":
        return AgentPopulation(self.N, self.holdings.copy(), list(self.roles), list(self.actions))


@dataclass(frozen=True)
class MarketState:
    M: float
    Q: float
    price: float
    reserves: float
    actions: tuple[Action, ...] = ()

    @property
    def pressure(self) -> float:
        """Exit pressure M + Q that prices the redemption value."""
        return self.M + self.Q


@dataclass(frozen=True)
class DynamicsResult:
    converged: bool
    iterations: int
    final_state: MarketState
    equilibrium_set: list[float]
    zone_estimate: Zone | None

    def to_dict(self) -> dict:
        state = asdict(self.final_state)
        state["actions"] = [a.value for a in self.final_state.actions]
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_state": state,
            "equilibrium_set": list(self.equilibrium_set),
            "zone_estimate": None if self.zone_estimate is None else self.zone_estimate.value,
        }


@dataclass(frozen=True)
class Shock:
    step: int
    redeemed_fraction: float

    def __post_init__(self):
        if not 0 <= self.redeemed_fraction <= 1:
            raise InvalidParameter("redeemed_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class PathRow:
    step: int
    theta: float
    M: float
    Q: float
    price: float
    r_c: float


def debtor_count(spec: StablecoinSpec, econ: EconomyFunctions, theta: float, N: int) -> int:
    """Good debtors in an N-agent population; nonzero only for Over with outstanding debt."""
    if spec.design is not Design.OVER or float(econ.debtor_debt(theta)) <= TOL:
        return 0
    if econ.n_debtors >= N:
        raise InvalidParameter(f"need more agents than debtors (N={N}, n_debtors={econ.n_debtors})")
    return econ.n_debtors


class _Game:
    """Payoff tables for one stage game.

    ``count_sales`` adds sold coins to the redemption pressure. ``anchor``
    replaces p(M) as the cap on the future price and ``hold_X`` fixes the
    pressure used for hold beliefs; ``fixed_X`` pins every redemption belief.
    """

    def __init__(self, spec, econ, theta, N, supply, n_debtors, *, count_sales=True, q_offset=0.0,
                 anchor=None, hold_X=None, fixed_X=None):
        self.spec, self.econ, self.theta = spec, econ, float(theta)
        self.T = spec.total_supply
        self.delta = supply / N
        self.count_sales = count_sales
        self.q_offset = q_offset
        self.anchor = anchor
        self.hold_X = hold_X
        self.fixed_X = fixed_X
        self.e = float(econ.no_intervention_price(theta))
        self.capacity = reserve_capacity(spec, econ, theta)
        liquidating = float(econ.liquidation_demand(theta)) > TOL
        self.support_on = spec.design is not Design.OVER or liquidating or n_debtors > 0
        self._p: dict[float, float] = {}
        self._v: dict[tuple[Role, float], float] = {}
        self._s: dict[float, float] = {}

    def _clip(self, x: float) -> float:
        return min(max(x, 0.0), self.T)

    def p(self, M: float) -> float:
        if M not in self._p:
            self._p[M] = float(self.econ.price_fn(self._clip(M)))
        return self._p[M]

    def v(self, role: Role, X: float) -> float:
        key = (role, X)
        if key not in self._v:
            ctx = UserContext(Q=self._clip(X), is_good_debtor=role is Role.GOOD_DEBTOR)
            self._v[key] = redemption_value(self.spec, self.econ, self.theta, ctx)
        return self._v[key]

    def v_future(self, role: Role, X: float) -> float:
        return 0.0 if X > self.capacity + TOL else self.v(role, X)

    def support(self, X: float) -> float:
        """Redemption value the best-placed redeemer can lock in at pressure X."""
        if X not in self._s:
            if self.spec.design is Design.OVER:
                x = self._clip(X)
                self._s[X] = float(self.econ.ratio_fn(x, self.theta) * self.econ.collateralization(self.theta)) \
                    if self.support_on else 0.0
            else:
                self._s[X] = self.v(Role.PLAIN, X)
        return self._s[X]

    def hold(self, role: Role, M: float, X: float) -> float:
        anchor = self.p(M) if self.anchor is None else self.anchor
        pf = min(anchor, max(self.e, min(1.0, self.support(X))))
        return float(self.econ.incentive_fn(max(pf, self.v_future(role, X))))

    def pressure(self, n_sell: int, n_redeem: int) -> float:
        exits = n_redeem + (n_sell if self.count_sales else 0)
        return self.q_offset + exits * self.delta

    def values(self, role: Role, current: Action, n_sell: int, n_redeem: int) -> dict[Action, float]:
        """Payoff of each action for one agent, its own move included in M and Q."""
        d = self.delta
        M = n_sell * d
        X = self.pressure(n_sell, n_redeem)
        sell = self.p(M) if current is Action.SELL else self.p(M + d)
        counted = current is Action.REDEEM or (current is Action.SELL and self.count_sales)
        if self.fixed_X is not None:
            x_redeem = x_hold = self.fixed_X
        else:
            x_redeem = X if counted else X + d
            x_hold = X if self.hold_X is None else self.hold_X
        return {
            Action.SELL: sell,
            Action.REDEEM: self.v(role, x_redeem),
            Action.HOLD: self.hold(role, M, x_hold),
        }


def _choose(values: dict[Action, float]) -> Action:
    best = max(values.values())
    for a in _TIE_ORDER:
        if values[a] >= best - TOL:
            return a
    raise AssertionError("unreachable")


def _stable(values: dict[Action, float], current: Action) -> bool:
    return all(values[a] <= values[current] + TOL for a in values)


def _state(game: _Game, pop: AgentPopulation) -> MarketState:
    n_sell, n_redeem = pop.count(Action.SELL), pop.count(Action.REDEEM)
    M = n_sell * game.delta
    Q = n_redeem * game.delta
    reserves = game.capacity - Q if math.isfinite(game.capacity) else math.inf
    return MarketState(M, Q, game.p(M), reserves, tuple(pop.actions))


def _one_shot(spec, econ, theta, pop: AgentPopulation, belief_Q=None) -> _Game:
    n_d = sum(1 for r in pop.roles if r is Role.GOOD_DEBTOR)
    return _Game(spec, econ, theta, pop.N, pop.supply, n_d, fixed_X=belief_Q)


def best_response(agent_index: int, pop: AgentPopulation, state: MarketState, spec: StablecoinSpec,
                  econ: EconomyFunctions, theta: float, belief_Q: float | None = None) -> Action:
    """Payoff-maximising action for one agent; ties go Hold, then Redeem, then Sell.

    ``belief_Q=None`` means beliefs match the realised pressure of ``state``.
    """
    game = _one_shot(spec, econ, theta, pop, belief_Q)
    d = game.delta
    n_sell = int(round(state.M / d)) if d > 0 else 0
    n_redeem = int(round(state.Q / d)) if d > 0 else 0
    return _choose(game.values(pop.roles[agent_index], pop.actions[agent_index], n_sell, n_redeem))


def is_fixed_point(game: _Game, pop: AgentPopulation) -> bool:
    n_sell, n_redeem = pop.count(Action.SELL), pop.count(Action.REDEEM)
    return all(_stable(game.values(r, a, n_sell, n_redeem), a) for r, a in zip(pop.roles, pop.actions))


def _iterate(game: _Game, pop: AgentPopulation, max_iter: int, seed: int | None) -> tuple[AgentPopulation, int]:
    pop = pop.copy()
    rng = np.random.default_rng(seed) if seed is not None else None
    n_sell, n_redeem = pop.count(Action.SELL), pop.count(Action.REDEEM)
    changed: list[int] = []
    for it in range(1, max_iter + 1):
        order = rng.permutation(pop.N) if rng is not None else range(pop.N)
        changed = []
        for i in order:
            cur = pop.actions[i]
            new = _choose(game.values(pop.roles[i], cur, n_sell, n_redeem))
            if new is cur:
                continue
            n_sell += (new is Action.SELL) - (cur is Action.SELL)
            n_redeem += (new is Action.REDEEM) - (cur is Action.REDEEM)
            pop.actions[i] = new
            changed.append(int(i))
        if not changed:
            return pop, it
    raise NonConvergence(max_iter, changed)


def _dedupe(points: Iterable[EquilibriumPoint]) -> list[EquilibriumPoint]:
    out: list[EquilibriumPoint] = []
    for pt in sorted(points, key=lambda x: -x.price):
        if not out or abs(out[-1].price - pt.price) > TOL:
            out.append(pt)
    return out


def _point(game: _Game, n_sell: int, n_redeem: int) -> EquilibriumPoint:
    M = n_sell * game.delta
    price = game.p(M)
    kind = "Peg" if abs(price - 1.0) <= TOL else "Depeg"
    belief = f"sellers={n_sell}, redeemers={n_redeem}, belief_Q={game.pressure(n_sell, n_redeem):.6g}"
    return EquilibriumPoint(1.0 if kind == "Peg" else price, M, kind, belief)


def enumerate_equilibria(spec: StablecoinSpec, econ: EconomyFunctions, theta: float, N: int) -> list[EquilibriumPoint]:
    """Every distinct equilibrium price over all aggregate profiles.

    Profiles are counted per role: (sellers, redeemers) among plain users and,
    for Over, among good debtors. Beliefs are consistent: the redemption value
    is evaluated at the profile's own exit pressure.
    """
    theta = econ.check_theta(theta)
    if not 1 <= N <= MAX_ENUM_N:
        raise InvalidParameter(f"enumeration needs 1 <= N <= {MAX_ENUM_N}, got {N}")
    n_d = debtor_count(spec, econ, theta, N)
    n_p = N - n_d
    game = _Game(spec, econ, theta, N, spec.total_supply, n_d)
    found = []
    stable: dict[tuple, bool] = {}

    def ok(role, action, n_sell, n_redeem):
        key = (role, action, n_sell, n_redeem)
        if key not in stable:
            stable[key] = _stable(game.values(role, action, n_sell, n_redeem), action)
        return stable[key]

    plain = [(s, q) for s in range(n_p + 1) for q in range(n_p + 1 - s)]
    debt = [(s, q) for s in range(n_d + 1) for q in range(n_d + 1 - s)]
    for sp, qp in plain:
        for sd, qd in debt:
            n_sell, n_redeem = sp + sd, qp + qd
            groups = (
                (Role.PLAIN, Action.SELL, sp), (Role.PLAIN, Action.REDEEM, qp), (Role.PLAIN, Action.HOLD, n_p - sp - qp),
                (Role.GOOD_DEBTOR, Action.SELL, sd), (Role.GOOD_DEBTOR, Action.REDEEM, qd),
                (Role.GOOD_DEBTOR, Action.HOLD, n_d - sd - qd),
            )
            if all(n == 0 or ok(r, a, n_sell, n_redeem) for r, a, n in groups):
                found.append(_point(game, n_sell, n_redeem))
    return _dedupe(found)


def zone_from_points(points: Sequence[EquilibriumPoint]) -> Zone:
    pegs = [p for p in points if p.kind == "Peg"]
    if not pegs:
        return Zone.DEPEG_ONLY
    return Zone.UNIQUE_PEG if len(points) == 1 else Zone.SELF_FULFILLING


def oracle_equilibria(spec: StablecoinSpec, econ: EconomyFunctions, theta: float, N: int,
                      max_iter: int = DEFAULT_MAX_ITER) -> list[EquilibriumPoint]:
    """Enumerated equilibria (N <= 24) merged with fixed points reached from all-Hold and all-Sell."""
    theta = econ.check_theta(theta)
    n_d = debtor_count(spec, econ, theta, N)
    points = enumerate_equilibria(spec, econ, theta, N) if N <= MAX_ENUM_N else []
    game = _Game(spec, econ, theta, N, spec.total_supply, n_d)
    for action in (Action.HOLD, Action.SELL):
        init = AgentPopulation.uniform(N, spec.total_supply, action, n_d)
        try:
            pop, _ = _iterate(game, init, max_iter, None)
        except NonConvergence:
            continue
        points.append(_point(game, pop.count(Action.SELL), pop.count(Action.REDEEM)))
    return _dedupe(points)


def zone_estimate(spec: StablecoinSpec, econ: EconomyFunctions, theta: float, N: int) -> Zone:
    return zone_from_points(oracle_equilibria(spec, econ, theta, N))


def run_dynamics(
    spec: StablecoinSpec,
    econ: EconomyFunctions,
    theta: float,
    N: int,
    init: AgentPopulation | None = None,
    belief_Q: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int | None = None,
) -> DynamicsResult:
    """Round-robin best responses until a full pass changes nothing.

    With ``seed`` each pass visits agents in a seeded random order. The zone
    estimate pools this run with the oracle's enumerated and extreme-start
    equilibria under consistent beliefs.
    """
    theta = econ.check_theta(theta)
    if max_iter < 1:
        raise InvalidParameter("max_iter must be >= 1")
    if not 1 <= N <= 10_000:
        raise InvalidParameter(f"N={N} outside [1, 10000]")
    n_d = debtor_count(spec, econ, theta, N)
    if init is None:
        init = AgentPopulation.uniform(N, spec.total_supply, Action.HOLD, n_d)
    if init.N != N:
        raise InvalidParameter(f"init has {init.N} agents, expected {N}")
    if abs(init.supply - spec.total_supply) > 1e-9 * spec.total_supply:
        raise InvalidParameter("init holdings must sum to total supply")
    game = _one_shot(spec, econ, theta, init, belief_Q)
    pop, iterations = _iterate(game, init, max_iter, seed)
    state = _state(game, pop)
    pooled = oracle_equilibria(spec, econ, theta, N, max_iter)
    prices = sorted({state.price, *(p.price for p in pooled)}, reverse=True)
    return DynamicsResult(True, iterations, state, prices, zone_from_points(pooled))


def simulate_run(
    spec: StablecoinSpec,
    econ: EconomyFunctions,
    theta_path: Sequence[float],
    shock: Shock | dict | None,
    steps: int,
    N: int = 20,
    max_iter: int = 200,
    seed: int | None = None,
) -> list[PathRow]:
    """Repeated stage games with burning of redeemed coins.

    Each step agents start from Hold and best-respond. They cap the future
    price at the previous step's price and expect the latest redemption flow
    to repeat when valuing a hold. Sales do not feed redemption pressure here;
    only actual redemptions (and the shock) do, and they shrink supply.
    """
    if len(theta_path) != steps:
        raise InvalidParameter(f"theta_path has {len(theta_path)} entries, expected {steps}")
    if isinstance(shock, dict):
        shock = Shock(int(shock["step"]), float(shock["redeemed_fraction"]))
    T = spec.total_supply
    rng_seed = seed
    Q_cum, last_flow, price = 0.0, 0.0, 1.0
    rows: list[PathRow] = []
    for step, theta in enumerate(theta_path):
        theta = econ.check_theta(theta)
        flow = 0.0
        if shock is not None and step == shock.step:
            flow = shock.redeemed_fraction * (T - Q_cum)
            Q_cum += flow
            last_flow = flow
        supply = T - Q_cum
        if supply <= TOL:
            rows.append(PathRow(step, theta, 0.0, Q_cum, float(econ.price_fn(0.0)), float(econ.ratio_fn(Q_cum, theta))))
            continue
        n_d = debtor_count(spec, econ, theta, N)
        game = _Game(spec, econ, theta, N, supply, n_d, count_sales=False, q_offset=Q_cum,
                     anchor=price, hold_X=min(T, Q_cum + last_flow))
        init = AgentPopulation.uniform(N, supply, Action.HOLD, n_d)
        try:
            pop, _ = _iterate(game, init, max_iter, rng_seed)
        except NonConvergence:
            pop = init  # no settled response this step: nobody trades
        n_sell, n_redeem = pop.count(Action.SELL), pop.count(Action.REDEEM)
        M = n_sell * game.delta
        redeemed = n_redeem * game.delta
        price = game.p(M)
        Q_cum = min(T, Q_cum + redeemed)
        last_flow = flow + redeemed
        rows.append(PathRow(step, theta, M, Q_cum, price, float(econ.ratio_fn(Q_cum, theta))))
        if rng_seed is not None:
            rng_seed += 1
    return rows
