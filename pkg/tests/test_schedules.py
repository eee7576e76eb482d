import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from epochlab.schedules import (
    Kind,
    ScheduleError,
    ScheduleSpec,
    ScheduleStepper,
    eval_cosine,
    eval_exp_hyperbolic,
    eval_exponential,
    eval_hyperbolic,
    eval_polynomial,
    evaluate,
    h_curve,
    hyperbolic_lr,
    schedule_series,
)
from epochlab.presets import PRESETS, preset

# Frozen with mpmath at 40 digits (independent of the float code path).
H_0_250_1000 = 0.66143782776614764763
HYP_AT_N = 0.33862831601662896714  # eta_init=1, eta_inf=1e-4, N=250, U=1000, n=250
EXPHYP_AT_N = 0.010367797752381965960  # eta_init=1, eta_inf=1e-3, N=250, U=1000, n=250
EXP_SIMPLECNN_50 = 3.4688281291975015289e-4  # 5.91e-4 * 0.9894**50


def hyp(eta_init=1.0, eta_inf=1e-4, N=250, U=1000):
    return ScheduleSpec(Kind.HYPERBOLIC, eta_init, eta_inf=eta_inf, max_epoch=N, upper_bound=U)


def exphyp(eta_init=1.0, eta_inf=1e-3, N=250, U=1000):
    return ScheduleSpec(Kind.EXP_HYPERBOLIC, eta_init, eta_inf=eta_inf, max_epoch=N, upper_bound=U)


class TestHCurve:
    def test_vertex(self):
        assert h_curve(250, 250, 1000) == 0.0
        assert h_curve(7, 7, 7) == 0.0

    @pytest.mark.parametrize("N", [1, 3, 10, 250, 1000])
    def test_asymptote_case(self, N):
        for n in range(N + 1):
            assert h_curve(n, N, N) == pytest.approx((N - n) / N, rel=1e-14, abs=1e-15)

    def test_derived_value(self):
        assert h_curve(0, 250, 1000) == pytest.approx(H_0_250_1000, rel=1e-15)

    def test_strictly_decreasing(self):
        vals = [h_curve(n, 250, 1000) for n in range(251)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("n,N,U", [(5, 4, 10), (0, 11, 10), (0, 0, 0), (-1, 3, 5)])
    def test_domain_errors(self, n, N, U):
        with pytest.raises(ScheduleError):
            h_curve(n, N, U)


class TestHyperbolic:
    def test_starts_at_eta_init(self):
        assert eval_hyperbolic(hyp(), 0) == 1.0

    def test_linear_when_N_equals_U(self):
        spec = hyp(eta_init=0.5, eta_inf=0.01, N=40, U=40)
        for n in range(41):
            assert eval_hyperbolic(spec, n) == pytest.approx(0.5 - 0.49 * n / 40, rel=1e-13)
        assert eval_hyperbolic(spec, 40) == pytest.approx(0.01, rel=1e-12)

    def test_derived_endpoint(self):
        assert eval_hyperbolic(hyp(), 250) == pytest.approx(HYP_AT_N, rel=1e-13)

    def test_rejects_N_above_U(self):
        with pytest.raises(ScheduleError):
            hyp(N=1001, U=1000)

    def test_rejects_eta_inf_above_init(self):
        with pytest.raises(ScheduleError):
            hyp(eta_init=1e-3, eta_inf=1e-2)

    def test_epoch_past_N(self):
        with pytest.raises(ScheduleError):
            eval_hyperbolic(hyp(N=10), 11)


class TestExpHyperbolic:
    def test_starts_at_eta_init(self):
        assert eval_exp_hyperbolic(exphyp(), 0) == 1.0

    def test_geometric_when_N_equals_U(self):
        spec = exphyp(eta_init=1.0, eta_inf=1e-3, N=30, U=30)
        for n in range(31):
            assert eval_exp_hyperbolic(spec, n) == pytest.approx(1e-3 ** (n / 30), rel=1e-12)

    def test_derived_endpoint(self):
        assert eval_exp_hyperbolic(exphyp(), 250) == pytest.approx(EXPHYP_AT_N, rel=1e-12)

    def test_log_space_identity(self):
        spec = exphyp(eta_init=4.59e-3, eta_inf=5.74e-7, N=49, U=250)
        for n in range(50):
            via_h = math.exp(hyperbolic_lr(n, math.log(4.59e-3), math.log(5.74e-7), 49, 250))
            assert eval_exp_hyperbolic(spec, n) == pytest.approx(via_h, rel=1e-12)


class TestBaselines:
    def test_polynomial(self):
        spec = ScheduleSpec(Kind.POLYNOMIAL, 1.0, power=0.5, max_epoch=1000)
        assert eval_polynomial(spec, 0) == 1.0
        assert eval_polynomial(spec, 1000) == 0.0
        assert eval_polynomial(spec, 750) == pytest.approx(0.5, rel=1e-15)

    def test_cosine(self):
        spec = ScheduleSpec(Kind.COSINE, 1.0, eta_min=0.0, max_epoch=100)
        assert eval_cosine(spec, 0) == 1.0
        assert eval_cosine(spec, 100) == pytest.approx(0.0, abs=1e-16)
        assert eval_cosine(spec, 50) == pytest.approx(0.5, rel=1e-15)
        floor = ScheduleSpec(Kind.COSINE, 1.0, eta_min=1e-4, max_epoch=100)
        assert eval_cosine(floor, 100) == pytest.approx(1e-4, rel=1e-12)

    def test_exponential(self):
        spec = ScheduleSpec(Kind.EXPONENTIAL, 1.0, gamma=0.9)
        assert eval_exponential(spec, 0) == 1.0
        assert eval_exponential(spec, 2) == pytest.approx(0.81, rel=1e-15)
        tuned = ScheduleSpec(Kind.EXPONENTIAL, 5.91e-4, gamma=0.9894)
        assert eval_exponential(tuned, 50) == pytest.approx(EXP_SIMPLECNN_50, rel=1e-13)

    def test_exponential_ignores_N(self):
        a = ScheduleSpec(Kind.EXPONENTIAL, 0.1, gamma=0.95, max_epoch=10)
        b = ScheduleSpec(Kind.EXPONENTIAL, 0.1, gamma=0.95, max_epoch=500)
        assert [evaluate(a, n) for n in range(11)] == [evaluate(b, n) for n in range(11)]

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind=Kind.POLYNOMIAL, eta_init=1.0, power=0.0),
            dict(kind=Kind.COSINE, eta_init=1.0, eta_min=2.0),
            dict(kind=Kind.EXPONENTIAL, eta_init=1.0, gamma=1.0),
            dict(kind=Kind.CONSTANT, eta_init=0.0),
            dict(kind=Kind.CONSTANT, eta_init=1.0, max_epoch=-1),
        ],
    )
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ScheduleError):
            ScheduleSpec(**kwargs)


class TestSeries:
    def test_constant(self):
        spec = ScheduleSpec(Kind.CONSTANT, 0.3)
        assert schedule_series(spec, 3) == [(0, 0.3), (1, 0.3), (2, 0.3)]

    def test_hyperbolic_full_budget_is_linear(self):
        spec = ScheduleSpec(Kind.HYPERBOLIC, 1.0, eta_inf=1e-4, upper_bound=20)
        series = schedule_series(spec, 21)
        assert [e for e, _ in series] == list(range(21))
        for n, lr in series:
            assert lr == pytest.approx(1 - (1 - 1e-4) * n / 20, rel=1e-12)

    def test_too_many_epochs_for_U(self):
        spec = ScheduleSpec(Kind.HYPERBOLIC, 1.0, eta_inf=1e-4, upper_bound=1000)
        with pytest.raises(ScheduleError):
            schedule_series(spec, 1002)
        assert len(schedule_series(spec, 1001)) == 1001

    @pytest.mark.parametrize("kind", list(Kind))
    def test_single_epoch_budget(self, kind):
        spec = PRESETS[f"deeponet-{kind.value.replace('-', '')}"]
        assert schedule_series(spec, 1) == [(0, spec.eta_init)]

    def test_budgets_agree_in_early_epochs(self):
        spec = ScheduleSpec(Kind.HYPERBOLIC, 1.0, eta_inf=1e-4, upper_bound=1000)
        curves = [[lr for _, lr in schedule_series(spec, e)] for e in (250, 500, 750, 1000)]
        for n in range(26):
            vals = [c[n] for c in curves]
            assert max(vals) / min(vals) - 1 < 0.05


class TestStepper:
    def test_first_step(self):
        spec = hyp(N=50, U=100)
        s = ScheduleStepper(spec)
        assert s.current_lr == 1.0
        assert s.step() == eval_hyperbolic(spec, 1)
        assert s.current_epoch == 1

    def test_constant_never_exhausts(self):
        s = ScheduleStepper(ScheduleSpec(Kind.CONSTANT, 0.2))
        assert [s.step() for _ in range(5)] == [0.2] * 5

    def test_matches_series_tail(self):
        spec = ScheduleSpec(Kind.COSINE, 1e-2, eta_min=1e-5).for_epochs(30)
        s = ScheduleStepper(spec)
        stepped = [s.step() for _ in range(29)]
        assert stepped == [lr for _, lr in schedule_series(spec, 30)[1:]]

    def test_hyperbolic_N_equals_U_lands_on_eta_inf(self):
        s = ScheduleStepper(hyp(eta_init=0.1, eta_inf=1e-3, N=60, U=60))
        for _ in range(60):
            last = s.step()
        assert last == pytest.approx(1e-3, rel=1e-12)
        with pytest.raises(ScheduleError):
            s.step()

    def test_needs_max_epoch(self):
        with pytest.raises(ScheduleError):
            ScheduleStepper(ScheduleSpec(Kind.POLYNOMIAL, 1.0, power=1.0))


def test_spec_roundtrip():
    spec = preset("deeponet-exphyperbolic", upper_bound=50).for_epochs(40)
    assert ScheduleSpec.from_dict(spec.to_dict()) == spec
    assert spec.upper_bound == 50 and spec.max_epoch == 39


def test_unknown_preset():
    with pytest.raises(KeyError):
        preset("resnet-cosine")


# --- properties -----------------------------------------------------------

valid_NU = st.integers(1, 5000).flatmap(lambda U: st.tuples(st.integers(0, U), st.just(U)))


@given(valid_NU, st.floats(0, 1))
def test_hyperbola_identity(NU, frac):
    N, U = NU
    assume(N < U)
    n = int(frac * N)
    y = h_curve(n, N, U)
    # exact arithmetic on the float y; only y's rounding remains, amplified
    # by 2 (yU / (U - N))**2 as the hyperbola approaches its asymptote
    yq = Fraction(y)
    lhs = Fraction(n - U, U - N) ** 2 - (yq * U / (U - N)) ** 2
    cond = 2 * (y * U / (U - N)) ** 2
    assert abs(float(lhs) - 1) <= max(1e-10, 4 * cond * 2.0**-53)


@given(valid_NU)
def test_h0_bounded_by_one(NU):
    N, U = NU
    assume(N > 0)
    h0 = h_curve(0, N, U)
    assert h0 <= 1.0
    if N == U:
        assert h0 == pytest.approx(1.0, abs=1e-12)


@given(st.integers(1, 100_000), st.floats(0.0, 0.25))
def test_slope_near_asymptote_far_from_vertex(N, frac):
    # epoch 0 sits far from the vertex when U - N is small next to N
    U = N + int(frac * N)
    assert abs(U * (h_curve(1, N, U) - h_curve(0, N, U)) + 1) < 0.05


@settings(max_examples=200)
@given(
    valid_NU,
    st.floats(1e-6, 1.0),
    st.floats(1e-6, 0.999),
    st.sampled_from([Kind.HYPERBOLIC, Kind.EXP_HYPERBOLIC]),
)
def test_floor_and_monotone(NU, eta_init, ratio, kind):
    N, U = NU
    N = min(N, 400)
    eta_inf = eta_init * ratio
    spec = ScheduleSpec(kind, eta_init, eta_inf=eta_inf, max_epoch=N, upper_bound=max(U, N))
    vals = [evaluate(spec, n) for n in range(N + 1)]
    assert vals[-1] >= eta_inf
    assert all(a >= b for a, b in zip(vals, vals[1:]))
