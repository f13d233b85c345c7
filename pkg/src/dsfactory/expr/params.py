"""
Parameter binding from command-line and pipeline values.
"""

import os
import json

from dsfactory.errors import BadParam
from dsfactory.expr.typecheck import normalize_param, value_type
from dsfactory.utils import canonical_value_text


def parse_param(text, base_dir=None):
    """
    Parse one `name=value` binding.

    The value is read as a JSON literal when possible and as plain text
    otherwise; `name=@path` loads the value from a JSON file.

    Args:
        text (str): Binding such as "limit=10", "target=@vec.json"
        base_dir (str): Directory that relative `@path` values resolve against

    Returns:
        tuple[str, object]: (name, value)
    """
    name, sep, raw = text.partition("=")
    name = name.strip()
    if not sep or not name:
        raise BadParam(f"parameter '{text}' is not of the form name=value")
    if raw.startswith("@"):
        return name, load_param_file(raw[1:], base_dir)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return name, coerce_param(name, value)


def load_param_file(path, base_dir=None):
    """
    Load a parameter value from a JSON file.

    A document of the form {"value": ...} is unwrapped, so files written by
    `df embed-file` can be passed directly.
    """
    if base_dir and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            value = json.load(f)
    except FileNotFoundError:
        raise BadParam(f"parameter file {path} does not exist")
    except json.JSONDecodeError as e:
        raise BadParam(f"parameter file {path} is not valid JSON: {e}")
    if isinstance(value, dict) and "value" in value:
        value = value["value"]
    return coerce_param(path, value)


def coerce_param(name, value):
    value_type(value, name)
    return list(normalize_param(value)) if isinstance(value, (list, tuple)) else value


def bind_params(items, base_dir=None):
    """Parse a list of `name=value` strings into a dict."""
    bound = {}
    for item in items or ():
        name, value = parse_param(item, base_dir)
        bound[name] = value
    return bound


def params_text(params, names=None):
    """
    Render bound parameters as canonical descriptor text.

    Args:
        params (dict): Parameter name -> value
        names (list[str]): Restrict to these names (those an expression uses)

    Returns:
        dict[str, str]: Name -> canonical value text
    """
    keys = names if names is not None else sorted(params)
    return {k: canonical_value_text(params[k]) for k in keys if k in params}

