import numpy as np
from rest_framework import serializers

CHARACTER_SELECTORS = ("all", "non-principal")
COEFFICIENT_SELECTORS = ("ones", "random-complex", "random-real")


class ExperimentConfigSerializer(serializers.Serializer):
    d = serializers.IntegerField(min_value=1)
    x = serializers.IntegerField(min_value=1)
    b_exponent = serializers.FloatField(default=1.0)
    characters = serializers.CharField(default="all")
    coefficients = serializers.CharField(default="ones")
    trials = serializers.IntegerField(default=1)
    seed = serializers.IntegerField(min_value=0, default=0)
    c_override = serializers.FloatField(min_value=0.0, allow_null=True, default=None)
    sigma_max = serializers.FloatField(min_value=1.0, allow_null=True, default=None)
    output = serializers.CharField(allow_blank=True, default="")
    format = serializers.ChoiceField(choices=["json", "csv"], default="json")
    record_threshold = serializers.BooleanField(default=False)

    def validate_characters(self, value: str):
        text = value.strip()
        if text in CHARACTER_SELECTORS:
            return text
        try:
            indices = [int(part) for part in text.replace(" ", "").split(",") if part]
        except ValueError:
            raise serializers.ValidationError(
                "expected 'all', 'non-principal' or a comma separated index list"
            )
        if not indices:
            raise serializers.ValidationError("character index list is empty")
        return indices

    def validate_coefficients(self, value: str) -> str:
        return value.strip()

    def validate_trials(self, value: int) -> int:
        if value < 1:
            raise serializers.ValidationError("trials must be >= 1")
        return value

    def validate(self, attrs):
        if attrs["d"] > attrs["x"]:
            raise serializers.ValidationError({"d": f"d={attrs['d']} exceeds x={attrs['x']}"})
        if not attrs["b_exponent"] > 0:
            raise serializers.ValidationError({"b_exponent": "b must be positive"})
        return attrs


class WitnessSerializer(serializers.Serializer):
    character_index = serializers.IntegerField()
    character = serializers.CharField()
    y_star = serializers.IntegerField()
    t_star = serializers.FloatField()
    sigma_star = serializers.FloatField()
    value = serializers.FloatField()


class VerificationReportSerializer(serializers.Serializer):
    variant = serializers.CharField()
    d = serializers.IntegerField()
    x = serializers.IntegerField()
    b_exponent = serializers.FloatField()
    k = serializers.IntegerField()
    lhs = serializers.FloatField()
    rhs = serializers.FloatField()
    ratio = serializers.FloatField()
    c_used = serializers.FloatField()
    c1_hat = serializers.FloatField(allow_null=True)
    L = serializers.FloatField()
    weighted_norm = serializers.FloatField()
    rhs_dual_display = serializers.FloatField(allow_null=True)
    lambda_max = serializers.FloatField(allow_null=True)
    seed = serializers.IntegerField(allow_null=True)
    witnesses = WitnessSerializer(many=True)
    passed = serializers.BooleanField()


class LemmaScanReportSerializer(serializers.Serializer):
    character = serializers.CharField()
    D = serializers.IntegerField()
    x = serializers.IntegerField()
    B = serializers.FloatField()
    t_max = serializers.FloatField()
    t_spacing = serializers.FloatField()
    grid_max = serializers.FloatField()
    empirical_max = serializers.FloatField()
    w_star = serializers.IntegerField()
    y_star = serializers.IntegerField()
    t_star = serializers.FloatField()
    refined = serializers.BooleanField()


class RectangleWitnessSerializer(serializers.Serializer):
    value = serializers.FloatField()
    y_star = serializers.IntegerField()
    t_star = serializers.FloatField()
    sigma_star = serializers.FloatField()
    refined = serializers.BooleanField()


class AbelReportSerializer(serializers.Serializer):
    character = serializers.CharField()
    m1 = serializers.FloatField()
    m_rect = serializers.FloatField()
    ratio = serializers.FloatField()
    bound_factor = serializers.FloatField()
    passed = serializers.BooleanField()
    witness_sigma1 = RectangleWitnessSerializer()
    witness_rect = RectangleWitnessSerializer()


class ExtremalReportSerializer(serializers.Serializer):
    k = serializers.IntegerField()
    lambda_max = serializers.FloatField()
    L = serializers.FloatField()
    c1_hat = serializers.FloatField()
    ratio_to_bound = serializers.FloatField()
    ratio_to_L = serializers.FloatField()
    max_diagonal_ratio = serializers.FloatField()
    lambda_without_cross_terms = serializers.FloatField()
    shifts = serializers.ListField(child=serializers.FloatField())
    cutoffs = serializers.ListField(child=serializers.IntegerField())


class DualityReportSerializer(serializers.Serializer):
    k = serializers.IntegerField()
    columns = serializers.IntegerField()
    lambda_max = serializers.FloatField()
    lambda_dual = serializers.FloatField()
    pullback_ratio = serializers.FloatField()
    max_trial_ratio = serializers.FloatField()
    trials = serializers.IntegerField()
    seed = serializers.IntegerField()
    passed = serializers.BooleanField()


class SelftestReportSerializer(serializers.Serializer):
    seed = serializers.IntegerField()
    matrices = serializers.IntegerField()
    probes = serializers.IntegerField()
    fixture_lambda = serializers.FloatField()
    worst_probe_excess = serializers.FloatField()
    worst_pullback_gap = serializers.FloatField()
    passed = serializers.BooleanField()


class CharacterSerializer(serializers.Serializer):
    index = serializers.IntegerField()
    label = serializers.CharField()
    order = serializers.IntegerField()
    parity = serializers.IntegerField()
    conductor = serializers.IntegerField()
    is_primitive = serializers.BooleanField()
    is_real = serializers.BooleanField()
    values = serializers.SerializerMethodField()

    def get_values(self, chi) -> list[list[float]]:
        values = chi.values_at(np.arange(1, chi.modulus + 1))
        return [[float(v.real), float(v.imag)] for v in values]


class ConstantEstimateSerializer(serializers.Serializer):
    c1_hat = serializers.FloatField()
    L = serializers.FloatField()
    c_default = serializers.FloatField()
    scans = LemmaScanReportSerializer(many=True)
