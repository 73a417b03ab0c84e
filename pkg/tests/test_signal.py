import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resid_arb.errors import ContractError
from resid_arb.signal import (
    EmaState,
    ForecastVector,
    deadjust_forecast,
    ema_transform_window,
    ema_update,
    str_forecast,
)


class TestEmaState:
    def test_alpha_zero_level_is_last_return(self):
        state = EmaState(0.0)
        for r in (0.01, -0.004, 0.02):
            state.update({"X": r})
        assert state.level("X") == 0.02

    def test_hand_unrolled_two_steps(self):
        state = EmaState(0.3)
        state.update({"X": 0.01})
        state.update({"X": -0.02})
        assert state.level("X") == pytest.approx(0.3 * 0.01 - 0.02, abs=1e-15)

    def test_constant_series_converges_to_geometric_limit(self):
        state = EmaState(0.5)
        c = 0.004
        for _ in range(80):
            state.update({"X": c})
        assert state.level("X") == pytest.approx(2 * c, abs=1e-12)

    def test_closed_form_equivalence(self, rng):
        alpha = 0.37
        returns = rng.normal(0, 0.01, 50)
        state = EmaState(alpha)
        for r in returns:
            state.update({"X": r})
        closed = sum(alpha**k * returns[-1 - k] for k in range(len(returns)))
        assert state.level("X") == pytest.approx(closed, rel=1e-12)

    def test_non_finite_input_names_asset(self):
        state = EmaState(0.2)
        with pytest.raises(ContractError, match="BAD"):
            state.update({"BAD": float("nan")})

    def test_reset_reseeds_on_return(self):
        state = EmaState(0.5)
        state.update({"X": 0.01})
        state.reset(["X"])
        assert not state.initialized("X")
        state.update({"X": 0.03})
        assert state.level("X") == 0.03

    def test_initialized_set_grows_without_reset(self):
        state = EmaState(0.5)
        state.update({"A": 0.01})
        state.update({"B": 0.02})
        assert state.assets == {"A", "B"}

    def test_invalid_coefficient(self):
        with pytest.raises(ContractError):
            EmaState(1.0)
        with pytest.raises(ContractError):
            EmaState(-0.1)

    def test_free_function_returns_state(self):
        state = EmaState(0.1)
        assert ema_update(state, {"A": 0.01}) is state


class TestEmaTransformWindow:
    def test_matches_recursive_state(self, rng):
        alpha = 0.3
        series = rng.normal(0, 0.01, 30)
        state = EmaState(alpha)
        levels = []
        for r in series:
            state.update({"X": r})
            levels.append(state.level("X"))
        assert np.allclose(ema_transform_window(series, alpha), levels, rtol=1e-15)

    def test_seed_level_continues_a_recursion(self, rng):
        alpha = 0.4
        series = rng.normal(0, 0.01, 20)
        full = ema_transform_window(series, alpha)
        tail = ema_transform_window(series[5:], alpha, seed_level=full[4])
        assert np.allclose(full[5:], tail, rtol=1e-15)


class TestDeadjust:
    def fv(self, scores):
        return ForecastVector(date=np.datetime64("2020-06-01"), scores=scores)

    def test_alpha_zero_is_identity(self):
        state = EmaState(0.0)
        state.update({"A": 0.01, "B": -0.02})
        raw = self.fv({"A": 0.004, "B": -0.001})
        out = deadjust_forecast(raw, state)
        assert out.scores == raw.scores

    def test_hand_substitution(self):
        state = EmaState(0.3)
        state.update({"A": 0.01})
        out = deadjust_forecast(self.fv({"A": 0.002}), state)
        assert out.scores["A"] == pytest.approx(-0.001, abs=1e-15)

    def test_dyadic_round_trip_is_exact(self):
        state = EmaState(0.5)
        state.update({"A": 0.25})
        chi_tilde = 0.125
        adjusted = chi_tilde + 0.5 * 0.25
        out = deadjust_forecast(self.fv({"A": adjusted}), state)
        assert out.scores["A"] == chi_tilde

    def test_random_round_trip(self, rng):
        alpha = 0.3
        state = EmaState(alpha)
        assets = [f"A{i}" for i in range(20)]
        state.update({a: r for a, r in zip(assets, rng.normal(0, 0.01, 20))})
        chi_tilde = {a: float(v) for a, v in zip(assets, rng.normal(0, 0.002, 20))}
        adjusted = {a: chi_tilde[a] + alpha * state.level(a) for a in assets}
        out = deadjust_forecast(self.fv(adjusted), state)
        for a in assets:
            assert out.scores[a] == pytest.approx(chi_tilde[a], rel=1e-12, abs=1e-15)

    def test_missing_state_is_contract_error(self):
        state = EmaState(0.3)
        with pytest.raises(ContractError, match="GHOST"):
            deadjust_forecast(self.fv({"GHOST": 0.001}), state)


class TestStrForecast:
    def test_losers_rank_first(self):
        state = EmaState(0.2)
        state.update({"WIN": 0.01, "LOSE": -0.01})
        fv = str_forecast(state, "2020-06-01")
        assert fv.scores == {"WIN": -0.01, "LOSE": 0.01}
        assert fv.scores["LOSE"] > fv.scores["WIN"]

    @given(st.lists(st.floats(-0.2, 0.2), min_size=2, max_size=12, unique=True))
    @settings(max_examples=50, deadline=None)
    def test_scores_antitone_in_level(self, levels):
        state = EmaState(0.0)
        assets = [f"A{i}" for i in range(len(levels))]
        state.update(dict(zip(assets, levels)))
        fv = str_forecast(state, "2020-06-01")
        for i in range(len(assets)):
            for j in range(len(assets)):
                if levels[i] > levels[j]:
                    assert fv.scores[assets[i]] < fv.scores[assets[j]]

    def test_uninitialized_assets_excluded(self):
        state = EmaState(0.2)
        state.update({"A": 0.01})
        fv = str_forecast(state, "2020-06-01", assets=["A", "B"])
        assert set(fv.scores) == {"A"}

    def test_non_finite_scores_rejected_by_vector(self):
        with pytest.raises(ContractError):
            ForecastVector(date=np.datetime64("2020-06-01"), scores={"A": float("inf")})
