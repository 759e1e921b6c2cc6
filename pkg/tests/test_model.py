"""Model-core tests: golden values, domain checks, invariants."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qstar import (
    DomainError,
    SequenceParams,
    ShapeConstants,
    StarPoint,
    inverse_exponential,
    l_of_qp,
    mnqq,
    mnqs,
    mnqs_raw,
    mnqt,
    qp_from_qs,
    qs_from_qp,
    qstar,
    qstar_components,
)
from conftest import PUBLISHED_PARAMS, Q_MIN, S_MAX, T_MAX, grid_points

# Golden values computed with a 50-digit arbitrary-precision evaluation of
# the factor formulas at the city parameters, QCIF (s/s_max = 1/16),
# 7.5 Hz (t/t_max = 1/4) and QP 36 (q = 2**(16/3)).
GOLDEN_MNQQ = 0.9443765079256497
GOLDEN_MNQS = 0.3538189449540424
GOLDEN_MNQT = 0.8332928764726016
GOLDEN_QSTAR = 0.2784350648747085

Q_AT_QP36 = 2.0 ** (32.0 / 6.0)


def city_point() -> StarPoint:
    return StarPoint(176 * 144, 7.5, Q_AT_QP36, S_MAX, T_MAX, Q_MIN)


class TestQpMapping:
    def test_qp_from_qs_at_16(self):
        assert qp_from_qs(16.0) == pytest.approx(28.0, abs=1e-12)

    def test_qp_from_qs_at_1(self):
        assert qp_from_qs(1.0) == pytest.approx(4.0, abs=1e-12)

    def test_qp_from_qs_high_precision(self):
        # 4 + 6*log2(40.3175), checked against an arbitrary-precision run
        assert qp_from_qs(40.3175) == pytest.approx(36.0, abs=1e-3)

    def test_qs_from_qp_examples(self):
        assert qs_from_qp(28.0) == 16.0
        assert qs_from_qp(4.0) == 1.0
        q44 = qs_from_qp(44.0)
        assert q44 == pytest.approx(101.59366732596477, abs=1e-9)
        assert round(q44) == 102

    @pytest.mark.parametrize("bad", [0.0, -2.0, math.nan])
    def test_qp_from_qs_domain(self, bad):
        with pytest.raises(DomainError):
            qp_from_qs(bad)

    def test_qs_from_qp_rejects_non_finite(self):
        with pytest.raises(DomainError):
            qs_from_qp(math.inf)

    @given(st.floats(min_value=4.0, max_value=51.0))
    @settings(max_examples=200)
    def test_round_trip(self, qp):
        assert qp_from_qs(qs_from_qp(qp)) == pytest.approx(qp, abs=1e-12)


class TestLOfQp:
    def test_above_knee(self):
        assert l_of_qp(36.0) == pytest.approx(0.918, abs=1e-12)

    def test_clamped_below_knee(self):
        assert l_of_qp(22.0) == pytest.approx(1.214, abs=1e-12)
        assert l_of_qp(22.0) == l_of_qp(28.0)

    def test_continuity_at_knee(self):
        eps = 1e-9
        assert l_of_qp(28.0) == pytest.approx(l_of_qp(28.0 + eps), abs=1e-6)
        assert l_of_qp(28.0) == pytest.approx(l_of_qp(28.0 - eps), abs=1e-6)

    def test_evaluates_above_51(self):
        consts = ShapeConstants()
        assert l_of_qp(60.0, consts) == pytest.approx(-0.037 * 60 + 2.25, abs=1e-12)


class TestShapeConstants:
    def test_defaults_valid(self):
        ShapeConstants()

    @pytest.mark.parametrize("field", ["beta_s", "beta_t", "beta_q"])
    def test_nonpositive_beta_rejected(self, field):
        with pytest.raises(DomainError):
            ShapeConstants(**{field: 0.0})

    def test_negative_l_rejected(self):
        # L(51) = -0.05*51 + 2.0 < 0
        with pytest.raises(DomainError):
            ShapeConstants(upsilon1=-0.05, upsilon2=2.0)

    def test_l_positive_everywhere_accepted(self):
        ShapeConstants(upsilon1=-0.04, upsilon2=2.25)


class TestStarPoint:
    def test_valid(self):
        p = city_point()
        assert p.s_norm == pytest.approx(1 / 16)
        assert p.t_norm == pytest.approx(0.25)
        assert p.q_norm == pytest.approx(16.0 / Q_AT_QP36)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(s=0.0),
            dict(s=2 * S_MAX),
            dict(t=-1.0),
            dict(t=31.0),
            dict(q=1.0),
            dict(q=0.0),
        ],
    )
    def test_invalid(self, kwargs):
        base = dict(s=S_MAX, t=T_MAX, q=16.0, s_max=S_MAX, t_max=T_MAX, q_min=16.0)
        base.update(kwargs)
        with pytest.raises(DomainError):
            StarPoint(**base)


class TestFactorGoldens:
    def test_mnqt_anchor(self):
        assert mnqt(30.0, 30.0, 4.10) == pytest.approx(1.0, abs=1e-15)

    def test_mnqt_golden(self):
        assert mnqt(7.5, 30.0, 4.10) == pytest.approx(GOLDEN_MNQT, abs=1e-12)
        # coarse value with the tolerance quoted alongside it
        assert mnqt(7.5, 30.0, 4.10) == pytest.approx(0.8333, abs=5e-4)

    def test_mnqt_vanishes_at_zero(self):
        assert mnqt(1e-12, 30.0, 4.10) < 1e-6

    def test_mnqs_raw_anchor(self):
        assert mnqs_raw(S_MAX, S_MAX, 3.2) == pytest.approx(1.0, abs=1e-15)

    def test_mnqs_raw_golden(self):
        val = mnqs_raw(S_MAX / 16.0, S_MAX, 3.23136, 0.74)
        assert val == pytest.approx(GOLDEN_MNQS, abs=1e-12)
        assert val == pytest.approx(0.3538, abs=5e-4)

    def test_mnqs_raw_increasing_in_alpha(self):
        lo = mnqs_raw(S_MAX / 4.0, S_MAX, 2.0)
        hi = mnqs_raw(S_MAX / 4.0, S_MAX, 4.0)
        assert hi > lo

    def test_mnqs_matches_raw_through_linkage(self):
        direct = mnqs(S_MAX / 16.0, Q_AT_QP36, S_MAX, 3.52)
        via_raw = mnqs_raw(S_MAX / 16.0, S_MAX, 3.52 * l_of_qp(36.0), 0.74)
        assert direct == pytest.approx(via_raw, abs=1e-15)
        assert direct == pytest.approx(GOLDEN_MNQS, abs=1e-12)

    def test_mnqs_anchor(self):
        assert mnqs(S_MAX, 40.0, S_MAX, 3.52) == pytest.approx(1.0, abs=1e-15)

    def test_mnqs_clamp_below_knee(self):
        # both QPs sit below the knee, so L and therefore the value agree
        a = mnqs(S_MAX / 4.0, qs_from_qp(22.0), S_MAX, 3.52)
        b = mnqs(S_MAX / 4.0, qs_from_qp(26.0), S_MAX, 3.52)
        assert a == pytest.approx(b, abs=1e-15)

    def test_mnqq_anchor(self):
        assert mnqq(16.0, 16.0, 7.25) == pytest.approx(1.0, abs=1e-15)

    def test_mnqq_golden(self):
        val = mnqq(Q_AT_QP36, 16.0, 7.25)
        assert val == pytest.approx(GOLDEN_MNQQ, abs=1e-12)
        assert val == pytest.approx(0.9444, abs=5e-4)

    def test_mnqq_vanishes_for_huge_q(self):
        assert mnqq(1e9, 16.0, 7.25) < 1e-6

    def test_qstar_golden(self, city_params):
        val = qstar(city_point(), city_params)
        assert val == pytest.approx(GOLDEN_QSTAR, abs=1e-12)
        assert val == pytest.approx(0.2784, abs=2e-3)

    def test_qstar_is_product_of_components(self, city_params):
        p = city_point()
        fq, fs, ft = qstar_components(p, city_params)
        assert qstar(p, city_params) == pytest.approx(fq * fs * ft, abs=1e-12)
        # any multiplication order agrees modulo reassociation
        assert fq * (fs * ft) == pytest.approx((fq * fs) * ft, abs=1e-12)

    def test_qstar_at_maximal_point(self, city_params):
        p = StarPoint(S_MAX, T_MAX, Q_MIN, S_MAX, T_MAX, Q_MIN)
        assert qstar(p, city_params) == pytest.approx(1.0, abs=1e-15)


class TestInvariants:
    def test_normalization_for_random_params(self):
        rng = np.random.default_rng(1234)
        p_max = StarPoint(S_MAX, T_MAX, Q_MIN, S_MAX, T_MAX, Q_MIN)
        for _ in range(100):
            params = SequenceParams(*rng.uniform(0.1, 20.0, size=3))
            assert abs(qstar(p_max, params) - 1.0) <= 1e-12

    @pytest.mark.parametrize("name", sorted(PUBLISHED_PARAMS))
    def test_monotone_along_each_axis(self, name):
        params = PUBLISHED_PARAMS[name]
        s_grid = np.linspace(S_MAX / 20, S_MAX, 20)
        t_grid = np.linspace(T_MAX / 20, T_MAX, 20)
        q_grid = np.linspace(Q_MIN, 120.0, 20)
        vals_s = [
            qstar(StarPoint(s, 15.0, 40.0, S_MAX, T_MAX, Q_MIN), params) for s in s_grid
        ]
        vals_t = [
            qstar(StarPoint(S_MAX / 4, t, 40.0, S_MAX, T_MAX, Q_MIN), params) for t in t_grid
        ]
        vals_q = [
            qstar(StarPoint(S_MAX / 4, 15.0, q, S_MAX, T_MAX, Q_MIN), params) for q in q_grid
        ]
        assert all(b >= a - 1e-15 for a, b in zip(vals_s, vals_s[1:]))
        assert all(b >= a - 1e-15 for a, b in zip(vals_t, vals_t[1:]))
        assert all(b <= a + 1e-15 for a, b in zip(vals_q, vals_q[1:]))

    def test_inverse_exponential_increasing_in_alpha(self):
        alphas = np.linspace(0.1, 20.0, 200)
        for x in np.arange(0.1, 0.95, 0.1):
            vals = [inverse_exponential(float(x), float(a)) for a in alphas]
            assert all(b > a for a, b in zip(vals, vals[1:]))

    @given(
        st.floats(min_value=0.01, max_value=1.0),
        st.floats(min_value=0.01, max_value=1.0),
        st.floats(min_value=1.0, max_value=10.0),
        st.floats(min_value=0.05, max_value=50.0),
        st.floats(min_value=0.05, max_value=50.0),
        st.floats(min_value=0.05, max_value=50.0),
    )
    @settings(max_examples=200)
    def test_outputs_in_unit_interval(self, sn, tn, qn, aq, ah, at):
        point = StarPoint(sn * S_MAX, tn * T_MAX, qn * Q_MIN, S_MAX, T_MAX, Q_MIN)
        params = SequenceParams(aq, ah, at)
        for v in (*qstar_components(point, params), qstar(point, params)):
            assert 0.0 < v <= 1.0 + 1e-15

    def test_grid_points_all_in_range(self, city_params):
        for point in grid_points():
            assert 0.0 < qstar(point, city_params) <= 1.0
