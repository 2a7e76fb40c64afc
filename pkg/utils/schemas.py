# utils/schemas.py
import json
import os
from functools import lru_cache
from typing import Any, Dict, Type

import jsonschema

from utils.errors import DataError, InvariantViolation, TransitError

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "docs", "schemas")


@lru_cache(maxsize=None)
def load_schema(name: str) -> Dict[str, Any]:
    """Load ``docs/schemas/<name>.schema.json``"""
    with open(os.path.join(SCHEMA_DIR, f"{name}.schema.json"), "r", encoding="utf-8") as f:
        return json.load(f)


def validate_artifact(document: Any, name: str, error: Type[TransitError] = InvariantViolation):
    """Raise ``error`` if ``document`` does not match schema ``name``

    Artifacts we are about to write fail with InvariantViolation; files we read
    fail with the caller's choice, usually DataError.
    """
    try:
        jsonschema.validate(instance=document, schema=load_schema(name))
    except jsonschema.ValidationError as e:
        raise error(f"{name} artifact failed schema validation: {e.message}") from e
    return document


def read_artifact(path: str, name: str) -> Any:
    """Load a JSON artifact and check it against schema ``name``; any problem is a DataError"""
    if not os.path.exists(path):
        raise DataError(f"{name} file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path} is not valid JSON: {e}") from e
    validate_artifact(document, name, DataError)
    return document
