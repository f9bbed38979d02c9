import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablepeg.core_model import (
    Action,
    Design,
    FutureBelief,
    StablecoinSpec,
    UserContext,
    build_economy,
    economy_problems,
    hold_value,
    make_economy,
    payoff,
    redemption_value,
)
from stablepeg.errors import InvalidParameter, InvalidQ, MonotonicityViolation, SupplyConsistencyViolation

from conftest import T, THETA_MAX, THETA_MIN, reference_economy


class TestSpec:
    def test_fiat_full_needs_full_reserve(self):
        with pytest.raises(InvalidParameter):
            StablecoinSpec(Design.FIAT_FULL, T, fiat_reserve=0.9 * T)

    def test_fiat_partial_range(self):
        for bad in (0.0, T, 2 * T):
            with pytest.raises(InvalidParameter):
                StablecoinSpec(Design.FIAT_PARTIAL, T, fiat_reserve=bad)

    def test_supply_positive(self):
        with pytest.raises(InvalidParameter):
            StablecoinSpec(Design.ALGO, 0.0)

    def test_design_parsed_from_text(self):
        assert StablecoinSpec("crypto", T).design is Design.CRYPTO


class TestRedemptionValue:
    def test_fiat_both_branches(self):
        # V_f = 100: Q = 50 is covered, Q = 200 gets V_f / Q
        spec = StablecoinSpec(Design.FIAT_PARTIAL, 400.0, fiat_reserve=100.0)
        e = build_economy({}, 400.0, THETA_MIN, THETA_MAX)
        assert redemption_value(spec, e, 1.0, UserContext(Q=50.0)) == 1.0
        assert redemption_value(spec, e, 1.0, UserContext(Q=200.0)) == 0.5

    def test_fiat_zero_q_takes_unexhausted_branch(self, econ, specs):
        assert redemption_value(specs["FiatPartial"], econ, 1.0, UserContext(Q=0.0)) == 1.0

    def test_over_liquidating_is_product(self):
        # theta = 0.8 gives r(0) = 0.8 and o = 1.5 with o0 = 1.875; liquidation active below 1.2
        e = reference_economy(collateral={"o0": 1.875})
        spec = StablecoinSpec(Design.OVER, T)
        assert redemption_value(spec, e, 0.8, UserContext(Q=0.0)) == pytest.approx(1.2, abs=1e-12)

    def test_over_non_debtor_without_liquidation(self, econ, specs):
        assert redemption_value(specs["Over"], econ, 2.0, UserContext(Q=10.0)) == 0.0

    def test_over_debtor_without_liquidation(self, econ, specs):
        v = redemption_value(specs["Over"], econ, 2.0, UserContext(Q=10.0, is_good_debtor=True))
        assert v == pytest.approx(2.0 * (1 - 0.5 * 0.1) * 1.25 * 2.0, abs=1e-12)

    def test_crypto_exhausted_reserve(self, econ, specs):
        # theta = 0.5: V_c = 60 < Q = 80
        v = redemption_value(specs["Crypto"], econ, 0.5, UserContext(Q=80.0))
        assert v == pytest.approx(0.5 * (1 - 0.4) * 60.0 / 80.0, abs=1e-12)

    def test_invalid_q(self, econ, specs):
        with pytest.raises(InvalidQ):
            redemption_value(specs["Algo"], econ, 1.0, UserContext(Q=-1.0))
        with pytest.raises(InvalidQ):
            redemption_value(specs["Algo"], econ, 1.0, UserContext(Q=T + 1.0))

    @settings(max_examples=200, deadline=None)
    @given(q=st.floats(0, T), theta=st.floats(THETA_MIN, THETA_MAX), debtor=st.booleans())
    def test_bounds(self, q, theta, debtor):
        econ = reference_economy()
        for spec in (StablecoinSpec(Design.FIAT_PARTIAL, T, 50.0), StablecoinSpec(Design.CRYPTO, T),
                     StablecoinSpec(Design.ALGO, T), StablecoinSpec(Design.OVER, T)):
            v = redemption_value(spec, econ, theta, UserContext(q, debtor))
            cap = max(1.0, float(econ.ratio_fn(q, theta) * econ.collateralization(theta)))
            assert 0.0 <= v <= cap + 1e-12
            if spec.design.is_fiat:
                assert v <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(q1=st.floats(0, T), q2=st.floats(0, T), t1=st.floats(THETA_MIN, THETA_MAX), t2=st.floats(THETA_MIN, THETA_MAX))
    def test_monotone(self, q1, q2, t1, t2):
        econ = reference_economy()
        (qa, qb), (ta, tb) = sorted((q1, q2)), sorted((t1, t2))
        for spec in (StablecoinSpec(Design.FIAT_PARTIAL, T, 50.0), StablecoinSpec(Design.CRYPTO, T),
                     StablecoinSpec(Design.ALGO, T)):
            v = lambda q, t: redemption_value(spec, econ, t, UserContext(q))
            assert v(qb, ta) <= v(qa, ta) + 1e-12, "nonincreasing in Q"
            if not spec.design.is_fiat:
                assert v(qa, tb) >= v(qa, ta) - 1e-12, "nondecreasing in theta"

    @settings(max_examples=100, deadline=None)
    @given(q=st.floats(0, T), theta=st.floats(THETA_MIN, THETA_MAX))
    def test_algo_matches_crypto_within_reserve(self, q, theta):
        econ = reference_economy()
        if q <= float(econ.reserve_value(theta)):
            a = redemption_value(StablecoinSpec(Design.ALGO, T), econ, theta, UserContext(q))
            c = redemption_value(StablecoinSpec(Design.CRYPTO, T), econ, theta, UserContext(q))
            assert a == c


class TestPayoff:
    def test_sell(self, econ, specs):
        M = 30.0  # p = 1 - 0.1 * 0.3 = 0.97
        assert payoff(Action.SELL, specs["Algo"], econ, 1.0, M, FutureBelief(M, 1.0), UserContext()) == pytest.approx(0.97, abs=1e-12)

    def test_hold_identity_incentive(self, econ, specs):
        out = payoff(Action.HOLD, specs["Algo"], econ, 1.0, 0.0, FutureBelief(50.0, 0.98), UserContext())
        assert out == pytest.approx(0.98, abs=1e-12)

    def test_hold_with_incentive(self, specs):
        e = reference_economy(incentive={"rate": 0.2})
        out = payoff(Action.HOLD, specs["Algo"], e, 1.0, 0.0, FutureBelief(50.0, 0.98), UserContext())
        assert out == pytest.approx(1.176, abs=1e-12)

    def test_redeem_is_redemption_value(self, econ, specs):
        ctx = UserContext(Q=40.0)
        assert payoff(Action.REDEEM, specs["Crypto"], econ, 1.5, 0.0, FutureBelief(0.0, 0.0), ctx) == \
            redemption_value(specs["Crypto"], econ, 1.5, ctx)

    def test_range_checked(self, econ, specs):
        with pytest.raises(InvalidParameter):
            payoff(Action.SELL, specs["Algo"], econ, 1.0, T + 5, FutureBelief(0.0, 1.0), UserContext())

    @settings(max_examples=100, deadline=None)
    @given(m=st.floats(0, T), q=st.floats(0, T), theta=st.floats(THETA_MIN, THETA_MAX))
    def test_hold_equals_max_when_future_is_now(self, m, q, theta):
        econ = reference_economy()
        spec = StablecoinSpec(Design.ALGO, T)
        v = redemption_value(spec, econ, theta, UserContext(q))
        out = payoff(Action.HOLD, spec, econ, theta, m, FutureBelief(m, v), UserContext(q))
        assert out == max(float(econ.price_fn(m)), v)

    def test_hold_value_helper(self, econ):
        assert hold_value(econ, 0.9, 0.95) == 0.95


class TestBuildEconomy:
    def test_reference_accepted(self):
        econ = reference_economy()
        assert economy_problems(econ) == []

    def test_negative_alpha_rejected(self):
        with pytest.raises(MonotonicityViolation) as info:
            reference_economy(r_c={"alpha": -0.5})
        assert "ratio_fn" in str(info.value)
        assert info.value.points

    def test_zero_alpha_accepted(self):
        # collateral whose price ignores redemptions
        econ = reference_economy(r_c={"alpha": 0.0})
        assert float(econ.ratio_fn(T, 1.0)) == 1.0

    def test_supply_consistency(self):
        econ = reference_economy()
        th = econ.theta_grid(100)
        total = econ.liquidation_demand(th) + econ.n_debtors * econ.debtor_debt(th)
        assert np.max(np.abs(total - T)) <= 1e-9

    def test_broken_supply_detected(self):
        import dataclasses
        econ = reference_economy()
        broken = dataclasses.replace(econ, debtor_debt=lambda th: np.full_like(np.asarray(th, float), 1.0))
        assert any(isinstance(p, SupplyConsistencyViolation) for p in economy_problems(broken))

    def test_e_must_stay_below_one(self):
        with pytest.raises(MonotonicityViolation):
            reference_economy(e={"min": 0.6, "max": 1.0})

    def test_exponential_family(self):
        econ = reference_economy(r_c={"family": "exponential", "k": 1.0})
        assert float(econ.ratio_fn(T, 2.0)) == pytest.approx(2.0 / math.e, abs=1e-15)

    def test_unknown_family(self):
        with pytest.raises(InvalidParameter):
            make_economy({"r_c": {"family": "cubic"}}, T, THETA_MIN, THETA_MAX)

    def test_theta_interval(self):
        with pytest.raises(InvalidParameter):
            make_economy({}, T, 2.0, 1.0)

    def test_theta_checked(self, econ):
        with pytest.raises(InvalidParameter):
            econ.check_theta(3.5)
