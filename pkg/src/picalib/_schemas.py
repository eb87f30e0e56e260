"""JSON schemas for run configs and emitted reports.

Configs are rejected on any unknown key; reports carry a fixed
three-block shape (command, metadata, result) where only
metadata.created_utc varies between identical runs.
"""

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "picalib run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": ["assign", "interval", "update", "calibrate",
                             "factor-scan", "asymptotics", "residual", "self-check"]},
        "family": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {
                "id": {"type": "string"},
                "hyper": {"type": "object",
                          "additionalProperties": {"type": "number"}},
            },
        },
        "factor": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["location", "scale", "location_scale", "custom"]},
                "q": {"type": "number"},
                "r": {"type": "number"},
            },
        },
        "sample": _NUMBER_ARRAY,
        "x": {"type": "number"},
        "prior": {"type": "string"},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nodes": {"oneOf": [{"type": "integer", "minimum": 11},
                                    {"type": "array", "minItems": 1, "maxItems": 2,
                                     "items": {"type": "integer", "minimum": 11}}]},
                "bounds": {"type": "array", "minItems": 1, "maxItems": 2,
                           "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                     "items": {"type": "number"}}},
                "tail_rel": {"type": "number", "exclusiveMinimum": 0,
                             "exclusiveMaximum": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1000},
        "true_params": {"oneOf": [{"type": "number"},
                                  _NUMBER_ARRAY,
                                  {"type": "array", "minItems": 1,
                                   "items": _NUMBER_ARRAY}]},
        "n": {"type": "integer", "minimum": 1},
        "method": {"enum": ["exact_assign", "gaussian_approx"]},
        "param_index": {"type": "integer", "minimum": 0},
        "q_list": _NUMBER_ARRAY,
        "r_list": _NUMBER_ARRAY,
        "n_list": {"type": "array", "items": {"type": "integer", "minimum": 1},
                   "minItems": 1},
        "x_values": _NUMBER_ARRAY,
        "trials_scale": {"type": "number", "exclusiveMinimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "format": {"enum": ["json", "csv"]},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "picalib report",
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "metadata", "result"],
    "properties": {
        "command": {"type": "string"},
        "metadata": {
            "type": "object",
            "additionalProperties": False,
            "required": ["created_utc", "package_version"],
            "properties": {
                "created_utc": {"type": "string"},
                "package_version": {"type": "string"},
                "config": {"type": "object"},
            },
        },
        "result": {"type": "object"},
    },
}

ERROR_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "picalib error object",
    "type": "object",
    "additionalProperties": False,
    "required": ["error"],
    "properties": {
        "error": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "message", "exit_code"],
            "properties": {
                "type": {"type": "string"},
                "message": {"type": "string"},
                "exit_code": {"type": "integer"},
                "partial_report": {"type": "object"},
            },
        },
    },
}
