import math

from rest_framework import serializers

from apps.core.domain import Verdict
from apps.inference.model import PredictiveMode
from apps.inference.ppos import PposMethod
from apps.inference.rules import RuleName
from apps.simulation.corpus import WEIGHT_TOLERANCE, ComponentKind, CorpusConfig, MixtureComponent


def _finite(value, label):
    if not math.isfinite(value):
        raise serializers.ValidationError(f"{label} must be finite.")
    return value


class StreamRowSerializer(serializers.Serializer):
    """One row of a stream file: the estimate of one experiment for one day."""
    experiment_id = serializers.CharField(max_length=200, trim_whitespace=True)
    day = serializers.IntegerField(min_value=1)
    estimate = serializers.FloatField()
    sigma = serializers.FloatField()

    def validate_estimate(self, value):
        return _finite(value, "Estimate")

    def validate_sigma(self, value):
        _finite(value, "Sigma")
        if value <= 0:
            raise serializers.ValidationError("Sigma must be positive.")
        return value


class MixtureComponentSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=ComponentKind.choices)
    weight = serializers.FloatField(min_value=0)
    mean = serializers.FloatField(default=0.0)
    sd = serializers.FloatField(min_value=0, default=0.0)

    def validate_mean(self, value):
        return _finite(value, "Mean")


class CorpusConfigSerializer(serializers.Serializer):
    """Corpus configuration document accepted by `simulate --corpus`."""
    n_experiments = serializers.IntegerField(min_value=1, default=345)
    mixture = MixtureComponentSerializer(many=True, required=False)
    sigma = serializers.FloatField(default=1.0)
    interim_day = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, required=False)

    def validate_sigma(self, value):
        _finite(value, "Sigma")
        if value <= 0:
            raise serializers.ValidationError("Sigma must be positive.")
        return value

    def validate_mixture(self, value):
        if not value:
            raise serializers.ValidationError("Mixture needs at least one component.")
        total = math.fsum(component['weight'] for component in value)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise serializers.ValidationError(f"Mixture weights must sum to 1, got {total}.")
        return value

    def to_config(self, interim_day: int, seed: int) -> CorpusConfig:
        """Build the corpus; values missing from the document fall back to the given ones."""
        data = self.validated_data
        mixture = data.get('mixture')
        return CorpusConfig(
            n_experiments=data['n_experiments'],
            mixture=tuple(MixtureComponent(**c) for c in mixture) if mixture else None,
            sigma=data['sigma'],
            interim_day=data.get('interim_day', interim_day),
            seed=data.get('seed', seed),
        )


class AnalyzeRequestSerializer(serializers.Serializer):
    rows = StreamRowSerializer(many=True, allow_empty=False)
    day = serializers.IntegerField(min_value=1, required=False)
    horizon = serializers.IntegerField(min_value=1, required=False)
    alpha = serializers.FloatField(min_value=0, max_value=1, required=False)
    rules = serializers.ListField(
        child=serializers.ChoiceField(choices=RuleName.choices), required=False, allow_empty=False
    )
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, required=False)
    mc_draws = serializers.IntegerField(min_value=1, required=False)
    gamma_success = serializers.FloatField(min_value=0, max_value=1, required=False)
    gamma_failure = serializers.FloatField(min_value=0, max_value=1, required=False)
    l = serializers.FloatField(required=False)  # noqa: E741
    m = serializers.FloatField(required=False)
    p_success = serializers.FloatField(min_value=0, max_value=1, required=False)
    p_fail = serializers.FloatField(min_value=0, max_value=1, required=False)
    interval_level = serializers.FloatField(min_value=0, max_value=1, required=False)
    mixture_variance = serializers.FloatField(required=False)
    ppos_method = serializers.ChoiceField(choices=PposMethod.choices, required=False)
    predictive_mode = serializers.ChoiceField(choices=PredictiveMode.choices, required=False)
    prior_mean = serializers.FloatField(required=False)
    prior_variance = serializers.FloatField(required=False)


class DecisionRowSerializer(serializers.Serializer):
    experiment_id = serializers.CharField()
    rule = serializers.ChoiceField(choices=RuleName.choices)
    statistic = serializers.FloatField()
    verdict = serializers.ChoiceField(choices=Verdict.choices)


class SkippedExperimentSerializer(serializers.Serializer):
    experiment_id = serializers.CharField()
    rows = serializers.IntegerField()


class AnalyzeResponseSerializer(serializers.Serializer):
    decisions = DecisionRowSerializer(many=True)
    skipped = SkippedExperimentSerializer(many=True)
    config = serializers.DictField()
