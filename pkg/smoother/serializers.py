import math

from django.conf import settings
from rest_framework import serializers
from rest_framework.settings import api_settings

from .models import Run
from .modules.base_config import CONFIG_VERSION, BenchmarkSuite, ConfigError, FitConfig, SuiteDesign
from .modules.covariance import MaternParams
from .modules.sampler import McmcConfig
from .modules.simulation import GRID_MODES, TRANSFORMS, MeanSpec, SimDesign


class StrictSerializer(serializers.Serializer):
    """Rejects keys the schema does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {api_settings.NON_FIELD_ERRORS_KEY: [f"Unknown keys: {', '.join(map(str, unknown))}"]}
                )
        return super().to_internal_value(data)


class VersionedSerializer(StrictSerializer):
    version = serializers.IntegerField(required=False, default=CONFIG_VERSION)

    def validate_version(self, value):
        if value != CONFIG_VERSION:
            raise serializers.ValidationError(f"Unsupported config version {value} (expected {CONFIG_VERSION})")
        return value


def _domain_field(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, **kwargs)


class MeanSerializer(StrictSerializer):
    amplitude = serializers.FloatField(default=3.0)
    frequency = serializers.FloatField(default=4.0)


class MaternSerializer(StrictSerializer):
    rho = serializers.FloatField(default=0.5)
    nu = serializers.FloatField(default=3.5)
    sigma2 = serializers.FloatField(default=5.0, min_value=0.0)


class SimDesignSerializer(VersionedSerializer):
    n = serializers.IntegerField(min_value=1)
    grid_mode = serializers.ChoiceField(choices=GRID_MODES, default='common')
    p = serializers.IntegerField(min_value=2, default=40)
    domain = _domain_field(default=lambda: [0.0, math.pi / 2])
    mean = MeanSerializer(required=False)
    covariance = MaternSerializer(required=False)
    transform = serializers.ChoiceField(choices=TRANSFORMS, default='none')
    noise_sd = serializers.FloatField(min_value=0.0, default=math.sqrt(5.0) / 2.0)
    seed = serializers.IntegerField(min_value=0, default=0)
    reference_size = serializers.IntegerField(min_value=2, default=40)

    def validate(self, attrs):
        try:
            attrs['_design'] = build_design(attrs)
        except ValueError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def create(self, validated_data):
        return validated_data['_design']


def build_design(attrs) -> SimDesign:
    return SimDesign(
        n=attrs['n'],
        grid_mode=attrs.get('grid_mode', 'common'),
        p=attrs.get('p', 40),
        domain=tuple(attrs.get('domain', (0.0, math.pi / 2))),
        mean=MeanSpec(**attrs.get('mean', {})),
        covariance=MaternParams(**attrs.get('covariance', {'rho': 0.5, 'nu': 3.5, 'sigma2': 5.0})),
        transform=attrs.get('transform', 'none'),
        noise_sd=attrs.get('noise_sd', math.sqrt(5.0) / 2.0),
        seed=attrs.get('seed', 0),
        reference_size=attrs.get('reference_size', 40),
    )


class McmcConfigSerializer(StrictSerializer):
    burn_in = serializers.IntegerField(min_value=0, default=2000)
    posterior_samples = serializers.IntegerField(min_value=1, default=10000)
    thinning = serializers.IntegerField(min_value=1, default=1)
    seed = serializers.IntegerField(min_value=0, default=0)
    chains = serializers.IntegerField(min_value=1, default=2)
    reservoir_size = serializers.IntegerField(min_value=1, required=False)
    fixed_sigma_eps2 = serializers.FloatField(required=False, allow_null=True)

    def validate_fixed_sigma_eps2(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError(f"must be positive, got {value}")
        return value


class HyperOverrideSerializer(StrictSerializer):
    c = serializers.FloatField(required=False)
    delta = serializers.FloatField(required=False)
    a_eps = serializers.FloatField(required=False)
    b_eps = serializers.FloatField(required=False)
    a_s = serializers.FloatField(required=False)
    b_s = serializers.FloatField(required=False)
    matern_rho = serializers.FloatField(required=False)
    matern_nu = serializers.FloatField(required=False)
    bandwidth = serializers.FloatField(required=False)

    def validate(self, attrs):
        for key, value in attrs.items():
            if key == 'delta' and not value > 2:
                raise serializers.ValidationError({key: f"must exceed 2, got {value}"})
            if not value > 0:
                raise serializers.ValidationError({key: f"must be positive, got {value}"})
        return attrs


class FitConfigSerializer(VersionedSerializer):
    working_grid_size = serializers.IntegerField(min_value=4, default=20)
    stationary = serializers.BooleanField(default=True)
    hyperparameters = HyperOverrideSerializer(required=False)
    mcmc = McmcConfigSerializer(required=False)
    reference_size = serializers.IntegerField(min_value=2, default=40)
    level = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.95)
    gof_level = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.05)
    psrf_threshold = serializers.FloatField(min_value=1.0, default=1.1)
    write_traces = serializers.BooleanField(default=True)
    domain = _domain_field(required=False, allow_null=True, default=None)

    def validate_domain(self, value):
        if value is not None and not value[1] > value[0]:
            raise serializers.ValidationError("Domain must have positive length")
        return value

    def create(self, validated_data):
        return build_fit_config(validated_data)


def build_mcmc_config(attrs) -> McmcConfig:
    attrs = dict(attrs)
    attrs.setdefault('reservoir_size', settings.BABF_RESERVOIR_SIZE)
    try:
        return McmcConfig(**attrs)
    except ValueError as exc:
        raise serializers.ValidationError({'mcmc': str(exc)})


def build_fit_config(attrs) -> FitConfig:
    domain = attrs.get('domain')
    return FitConfig(
        working_grid_size=attrs.get('working_grid_size', 20),
        stationary=attrs.get('stationary', True),
        hyperparameters=dict(attrs.get('hyperparameters', {})),
        mcmc=build_mcmc_config(attrs.get('mcmc', {})),
        reference_size=attrs.get('reference_size', 40),
        level=attrs.get('level', 0.95),
        gof_level=attrs.get('gof_level', 0.05),
        psrf_threshold=attrs.get('psrf_threshold', 1.1),
        write_traces=attrs.get('write_traces', True),
        domain=tuple(domain) if domain is not None else None,
    )


class SuiteDesignSerializer(StrictSerializer):
    name = serializers.CharField(max_length=100)
    design = SimDesignSerializer()
    fit = FitConfigSerializer(required=False)


class BenchmarkSuiteSerializer(VersionedSerializer):
    name = serializers.CharField(max_length=100)
    designs = SuiteDesignSerializer(many=True, allow_empty=False)
    methods = serializers.ListField(
        child=serializers.ChoiceField(choices=['babf', 'css']), allow_empty=False, default=lambda: ['babf', 'css']
    )
    replications = serializers.IntegerField(min_value=1, default=30)
    seed = serializers.IntegerField(min_value=0, default=0)

    def validate_designs(self, value):
        names = [d['name'] for d in value]
        if len(set(names)) != len(names):
            raise serializers.ValidationError("Design names must be unique within a suite")
        return value

    def create(self, validated_data):
        designs = tuple(
            SuiteDesign(
                name=d['name'],
                design=d['design']['_design'],
                fit=build_fit_config(d.get('fit', {})),
            )
            for d in validated_data['designs']
        )
        return BenchmarkSuite(
            name=validated_data['name'],
            designs=designs,
            methods=tuple(dict.fromkeys(validated_data.get('methods', ['babf', 'css']))),
            replications=validated_data.get('replications', 30),
            seed=validated_data.get('seed', 0),
        )


class RunSerializer(serializers.ModelSerializer):
    duration = serializers.FloatField(read_only=True)

    class Meta:
        model = Run
        fields = '__all__'


def _flatten_errors(errors, prefix=''):
    if isinstance(errors, dict):
        for key, value in errors.items():
            name = prefix if key == api_settings.NON_FIELD_ERRORS_KEY else (f"{prefix}.{key}" if prefix else str(key))
            yield from _flatten_errors(value, name)
    elif isinstance(errors, list):
        for index, value in enumerate(errors):
            if isinstance(value, (dict, list)):
                yield from _flatten_errors(value, f"{prefix}[{index}]")
            else:
                yield f"{prefix}: {value}" if prefix else str(value)
    else:
        yield f"{prefix}: {errors}" if prefix else str(errors)


def validate_config(serializer_class, data):
    """Validate a config document and build its domain object, raising ConfigError on failure."""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise ConfigError(list(_flatten_errors(serializer.errors)))
    try:
        return serializer.save()
    except serializers.ValidationError as exc:
        raise ConfigError(list(_flatten_errors(exc.detail)))
