"""
Serializers for run configuration and pipeline records
"""
from pathlib import Path

from rest_framework import serializers

TEXT_MODES = ['name_only', 'name_plus_description']
SAMPLERS = ['random_walk', 'metropolis_hastings']
PROPOSALS = ['uniform', 'softmax']
TSNE_METRICS = ['euclidean', 'cosine']
REPORT_FORMATS = ['json', 'csv']


class RunConfigSerializer(serializers.Serializer):
    """Validate a merged run config (settings, file, flags)"""
    vocabulary = serializers.CharField()
    embeddings = serializers.CharField(required=False, allow_blank=True,
                                       default='')
    text_mode = serializers.ChoiceField(choices=TEXT_MODES)

    embed_endpoint = serializers.CharField(allow_blank=True)
    embed_model = serializers.CharField()
    embed_batch_size = serializers.IntegerField(min_value=1)
    embed_timeout = serializers.FloatField()
    embed_concurrency = serializers.IntegerField(min_value=1)
    embed_model_field = serializers.CharField()
    embed_input_field = serializers.CharField()
    embed_data_field = serializers.CharField()
    embed_vector_field = serializers.CharField()
    cache_dir = serializers.CharField()

    temperature = serializers.FloatField()
    steps = serializers.IntegerField(min_value=2)
    walks = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1)
    sampler = serializers.ChoiceField(choices=SAMPLERS)
    proposal = serializers.ChoiceField(choices=PROPOSALS)
    epsilon = serializers.FloatField()
    workers = serializers.IntegerField(min_value=1)
    power_tol = serializers.FloatField()
    power_max_iters = serializers.IntegerField(min_value=1)

    window = serializers.IntegerField(min_value=1)

    perplexity = serializers.FloatField()
    tsne_iterations = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField()
    momentum_initial = serializers.FloatField(min_value=0, max_value=1)
    momentum_final = serializers.FloatField(min_value=0, max_value=1)
    momentum_switch = serializers.IntegerField(min_value=0)
    exaggeration = serializers.FloatField(min_value=1)
    exaggeration_iterations = serializers.IntegerField(min_value=0)
    tsne_metric = serializers.ChoiceField(choices=TSNE_METRICS)
    additive_categories = serializers.CharField(required=False,
                                                allow_blank=True, default='')

    output_dir = serializers.CharField()
    report_format = serializers.ChoiceField(choices=REPORT_FORMATS)

    def get_fields(self):
        """`lambda` is a keyword, so the field is added by name here"""
        fields = super().get_fields()
        fields['lambda'] = serializers.FloatField()
        return fields

    def validate_vocabulary(self, value):
        if not Path(value).is_file():
            raise serializers.ValidationError(
                f'Vocabulary file {value} does not exist')
        return value

    def validate(self, attrs):
        """Bounds the field types cannot express"""
        positive = [
            'temperature', 'epsilon', 'embed_timeout', 'power_tol',
            'perplexity', 'learning_rate',
        ]
        errors = {
            name: ['Must be greater than 0.']
            for name in positive if attrs[name] <= 0
        }
        if not 0 < attrs['lambda'] <= 1:
            errors['lambda'] = ['Must be in (0, 1].']
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class TraceRecordSerializer(serializers.Serializer):
    """One line of a traces JSONL file"""
    walk = serializers.IntegerField(min_value=0)
    seed = serializers.IntegerField(min_value=0)
    steps = serializers.ListField(
        child=serializers.IntegerField(min_value=0), allow_empty=False)
    rejected = serializers.ListField(
        child=serializers.IntegerField(min_value=0), required=False,
        default=list)
    sampler = serializers.ChoiceField(choices=SAMPLERS)
    config_hash = serializers.CharField()

    def validate(self, attrs):
        if any(index >= len(attrs['steps']) for index in attrs['rejected']):
            raise serializers.ValidationError(
                'Rejected step index beyond the trace')
        return attrs


class RegressionResultSerializer(serializers.Serializer):
    """Deviation regression statistics at full precision"""
    slope = serializers.FloatField()
    intercept = serializers.FloatField()
    stderr = serializers.FloatField()
    t_statistic = serializers.FloatField()
    p_value = serializers.FloatField(min_value=0, max_value=1)
    r_squared = serializers.FloatField(min_value=0, max_value=1)
    n = serializers.IntegerField(min_value=3)
