"""
Serializers for semantic space input records
"""
from rest_framework import serializers


class VocabularyRowSerializer(serializers.Serializer):
    """Serializer for one row of the vocabulary CSV"""
    name = serializers.CharField(max_length=255, trim_whitespace=False)
    description = serializers.CharField(
        required=False, allow_blank=True, default='')
    categories = serializers.CharField(
        required=False, allow_blank=True, default='')

    def validate_name(self, value):
        """Keep the name verbatim but refuse one that is only whitespace"""
        if not value.strip():
            raise serializers.ValidationError('Name is blank')
        return value

    def validate_categories(self, value):
        """Split the `|` separated labels, rejecting empty tokens"""
        if not value:
            return []
        tokens = [token.strip() for token in value.split('|')]
        if any(not token for token in tokens):
            raise serializers.ValidationError(
                f'Empty category token in {value!r}')
        return tokens


class EmbeddingRecordSerializer(serializers.Serializer):
    """Serializer for the envelope of one embeddings JSONL record.

    Vector entries are checked with numpy by the loader; validating
    1536 floats per row through serializer fields is needlessly slow.
    """
    id = serializers.IntegerField(min_value=0)
    vector = serializers.ListField(allow_empty=False)
