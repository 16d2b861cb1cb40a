"""
Serializers for corpus records.
File: apps/corpus/serializers.py

One corpus line is a JSON object:
{
    "id": "d1",
    "edus": [["good", "food"], ["bad", "service"]]
}
"""

from rest_framework import serializers


class StrictCharField(serializers.CharField):
    """CharField that refuses numbers and booleans instead of converting them."""

    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail('invalid')
        return super().to_internal_value(data)


class TokenListField(serializers.ListField):
    """One EDU: a non-empty list of non-empty tokens, kept exactly as written."""
    child = StrictCharField(allow_blank=False, trim_whitespace=False)

    def __init__(self, **kwargs):
        kwargs.setdefault('allow_empty', False)
        super().__init__(**kwargs)


class CorpusRecordSerializer(serializers.Serializer):
    """
    Validates a single document record.

    Casing and punctuation are left untouched: input is pre-tokenized and
    pre-segmented.
    """
    id = StrictCharField(allow_blank=False, trim_whitespace=False)
    edus = serializers.ListField(child=TokenListField(), allow_empty=False)

    def validate_id(self, value):
        """Document ids end up in tab-separated tree files."""
        if '\t' in value or '\n' in value:
            raise serializers.ValidationError('Document id must not contain tabs or newlines.')
        return value


def first_error(errors):
    """Flatten DRF's nested error structure into one readable message."""
    if isinstance(errors, dict):
        for field, value in errors.items():
            return f'{field}: {first_error(value)}'
    if isinstance(errors, list):
        for index, value in enumerate(errors):
            if value:
                inner = first_error(value)
                return inner if isinstance(value, str) else f'[{index}] {inner}'
    return str(errors)
