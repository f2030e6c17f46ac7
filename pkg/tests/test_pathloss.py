import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densemimo.pathloss import (
    PathLossModel,
    beta,
    dump_model,
    load_model,
    make_dual_slope_default,
    make_single_slope,
)


class TestDefaultModel:
    def test_slopes_and_breakpoint(self):
        m = make_dual_slope_default()
        assert m.alphas == (2.1, 4.0)
        assert m.breakpoints_m == (0.0, 100.0, math.inf)
        assert m.upsilons[0] == 8.3e-4

    def test_far_coefficient_follows_continuity(self):
        m = make_dual_slope_default()
        assert m.upsilons[1] == pytest.approx(8.3e-4 * 100.0**1.9, rel=1e-14)
        # Within 1% of the commonly quoted rounded value 5.2481.
        assert m.upsilons[1] == pytest.approx(5.2481, rel=1e-2)

    def test_beta_at_breakpoint_agrees_from_both_slopes(self):
        m = make_dual_slope_default()
        left = m.upsilons[0] * 100.0 ** (-2.1)
        right = m.upsilons[1] * 100.0 ** (-4.0)
        assert left == pytest.approx(right, rel=1e-12)
        assert beta(m, 100.0) == pytest.approx(5.237e-8, rel=1e-3)


class TestBeta:
    def test_single_slope_power_law(self):
        m = make_single_slope(4.0, upsilon1=1.0)
        assert beta(m, 10.0) == pytest.approx(1e-4, rel=1e-14)
        d = np.logspace(-2, 5, 50)
        np.testing.assert_allclose(beta(m, d), d**-4.0, rtol=1e-14)

    def test_vector_matches_scalar(self):
        m = make_dual_slope_default()
        d = np.array([0.5, 99.0, 100.0, 101.0, 1e4])
        vec = beta(m, d)
        for i, di in enumerate(d):
            assert vec[i] == beta(m, float(di))

    def test_continuity_at_breakpoints(self):
        m = make_dual_slope_default()
        for r in m.breakpoints_m[1:-1]:
            eps = 1e-9 * r
            lo = beta(m, r - eps)
            hi = beta(m, r + eps)
            assert lo == pytest.approx(hi, rel=1e-6)

    def test_monotone_non_increasing(self):
        m = make_dual_slope_default()
        d = np.logspace(-3, 6, 10_000)
        vals = beta(m, d)
        assert np.all(np.diff(vals) <= 0)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_nonpositive_distance(self, bad):
        m = make_dual_slope_default()
        with pytest.raises(ValueError):
            beta(m, bad)

    def test_rejects_nonpositive_in_array(self):
        m = make_dual_slope_default()
        with pytest.raises(ValueError):
            beta(m, np.array([1.0, 0.0]))


class TestValidation:
    def test_breakpoints_must_start_at_zero_and_end_at_inf(self):
        with pytest.raises(ValueError):
            PathLossModel((1.0, 100.0, math.inf), (2.1, 4.0), (1.0, 1.0))
        with pytest.raises(ValueError):
            PathLossModel((0.0, 100.0, 200.0), (2.1, 4.0), (1.0, 1.0))

    def test_breakpoints_must_increase(self):
        with pytest.raises(ValueError):
            PathLossModel(
                (0.0, 100.0, 100.0, math.inf), (2.1, 3.0, 4.0), (1.0, 1.0, 1.0)
            )

    def test_exponents_must_be_non_decreasing(self):
        with pytest.raises(ValueError):
            PathLossModel((0.0, 100.0, math.inf), (4.0, 2.1), (1.0, 1.0))

    def test_last_exponent_must_exceed_two(self):
        with pytest.raises(ValueError):
            make_single_slope(2.0)
        with pytest.raises(ValueError):
            make_single_slope(1.5)

    def test_discontinuous_coefficients_rejected(self):
        with pytest.raises(ValueError, match="discontinuity"):
            PathLossModel((0.0, 100.0, math.inf), (2.1, 4.0), (8.3e-4, 5.2481))

    def test_slope_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            PathLossModel((0.0, 100.0, math.inf), (2.1, 3.0, 4.0), (1.0, 1.0, 1.0))


class TestJsonInterface:
    def test_round_trip(self, tmp_path):
        m = make_dual_slope_default()
        path = tmp_path / "model.json"
        dump_model(m, path)
        loaded = load_model(path)
        assert loaded == m

    def test_documented_shape_loads(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(
            '{"breakpoints_m": [100], "alphas": [2.1, 4.0], "upsilon1": 8.3e-4}'
        )
        m = load_model(path)
        assert m == make_dual_slope_default()

    def test_explicit_coefficients_are_continuity_checked(self, tmp_path):
        path = tmp_path / "model.json"
        payload = {
            "breakpoints_m": [100],
            "alphas": [2.1, 4.0],
            "upsilon1": 8.3e-4,
            "upsilons": [8.3e-4, 5.2481],
        }
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="discontinuity"):
            load_model(path)

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"alphas": [4.0]}')
        with pytest.raises(ValueError):
            load_model(path)


@st.composite
def models(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    alphas = sorted(
        draw(
            st.lists(
                st.floats(min_value=0.5, max_value=6.0),
                min_size=n,
                max_size=n,
            )
        )
    )
    alphas[-1] = max(alphas[-1], 2.1)
    breaks = sorted(
        draw(
            st.lists(
                st.floats(min_value=1.0, max_value=1e4),
                min_size=n - 1,
                max_size=n - 1,
                unique=True,
            )
        )
    )
    upsilon1 = draw(st.floats(min_value=1e-6, max_value=10.0))
    ups = [upsilon1]
    for r, a_lo, a_hi in zip(breaks, alphas, alphas[1:]):
        ups.append(ups[-1] * r ** (a_hi - a_lo))
    return PathLossModel((0.0, *breaks, math.inf), tuple(alphas), tuple(ups))


class TestModelProperties:
    @given(models())
    @settings(max_examples=100, deadline=None)
    def test_beta_monotone_and_continuous(self, m):
        d = np.logspace(-1, 5, 400)
        vals = beta(m, d)
        assert np.all(np.diff(vals) <= vals[:-1] * 1e-12)
        for r in m.breakpoints_m[1:-1]:
            assert beta(m, r * (1 - 1e-9)) == pytest.approx(
                beta(m, r * (1 + 1e-9)), rel=1e-6
            )

    @given(models(), st.floats(min_value=1e-2, max_value=1e5))
    @settings(max_examples=100, deadline=None)
    def test_beta_positive(self, m, d):
        assert beta(m, d) > 0
