import math

import pytest

from apps.core.domain import Decision, EffectStream, GaussianDist, Verdict
from apps.core.exceptions import InvalidConfig, InvalidEstimate, InvalidScale, StreamFileError


class TestEffectStream:
    def test_total_is_exact_regardless_of_order(self):
        values = (1e16, 1.0, -1e16, 1.0)
        assert EffectStream(values, 1.0).total == 2.0
        assert EffectStream(tuple(reversed(values)), 1.0).total == 2.0

    @pytest.mark.parametrize('sigma', [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_sigma(self, sigma):
        with pytest.raises(InvalidScale):
            EffectStream((0.0,), sigma)

    @pytest.mark.parametrize('value', [math.inf, -math.inf, math.nan])
    def test_rejects_non_finite_estimates(self, value):
        with pytest.raises(InvalidEstimate):
            EffectStream((0.0, value), 1.0)

    def test_prefix_and_extension(self):
        stream = EffectStream((1.0, 2.0, 3.0), 2.0)
        assert stream.prefix(2).estimates == (1.0, 2.0)
        assert stream.prefix(2).extended([3.0]) == stream
        with pytest.raises(InvalidConfig):
            stream.prefix(4)

    def test_scaled(self):
        stream = EffectStream((1.0, -2.0), 0.5).scaled(2.0)
        assert stream.estimates == (2.0, -4.0)
        assert stream.sigma == 1.0


class TestGaussianDist:
    def test_cdf_at_mean_is_half(self):
        assert GaussianDist(3.0, 4.0).cdf(3.0) == pytest.approx(0.5, abs=1e-15)

    def test_cdf_is_nondecreasing(self):
        dist = GaussianDist(-1.0, 0.25)
        values = [dist.cdf(x / 10) for x in range(-50, 50)]
        assert values == sorted(values)

    def test_point_mass_is_a_step(self):
        dist = GaussianDist(5.0, 0.0)
        assert dist.cdf(4.999) == 0.0
        assert dist.cdf(5.0) == 1.0

    def test_rejects_negative_variance(self):
        with pytest.raises(InvalidScale):
            GaussianDist(0.0, -1.0)


def test_decision_to_dict():
    decision = Decision(Verdict.STOP_SUCCESS, 'ppos', 0.95)
    assert decision.to_dict() == {'rule': 'ppos', 'verdict': 'stop_success', 'statistic': 0.95}


def test_stream_file_error_names_row():
    error = StreamFileError("duplicate day 3", row=12)
    assert error.row == 12
    assert str(error) == "row 12: duplicate day 3"
