"""CSV/JSON/config readers and writers used by the command line."""

from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class InputSchemaError(ValueError):
    """Input table does not follow the ``cluster,y,x1,...,xp`` layout."""


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputSchemaError(f"row {row}: column {col!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise InputSchemaError(f"row {row}: column {col!r} is not finite: {text!r}")
    return value


def _coerce_labels(raw: list[str]):
    try:
        return np.array([int(v) for v in raw])
    except ValueError:
        return np.array(raw, dtype=object)


def read_input_table(path, require_x: bool = True):
    """Read ``cluster,y,x1,...,xp``; returns ``(labels, y, X)``.

    ``X`` is ``None`` when the file has no covariate columns and
    ``require_x`` is false (precomputed-distance mode).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputSchemaError("input file is empty")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["cluster", "y"]:
        raise InputSchemaError(f"header must start with 'cluster,y', got {','.join(header[:2])!r}")
    xcols = header[2:]
    if require_x and not xcols:
        raise InputSchemaError("need at least one covariate column x1,...,xp")
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if len(body) < 4:
        raise InputSchemaError(f"need at least 4 observations, got {len(body)}")
    labels, y, X = [], [], []
    for n, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise InputSchemaError(f"row {n}: expected {len(header)} fields, got {len(r)}")
        if any(c.strip() == "" for c in r):
            raise InputSchemaError(f"row {n}: missing value")
        labels.append(r[0].strip())
        y.append(_parse_float(r[1], n, "y"))
        X.append([_parse_float(v, n, c) for v, c in zip(r[2:], xcols)])
    X = np.array(X, dtype=float) if xcols else None
    return _coerce_labels(labels), np.array(y), X


def read_distance_csv(path) -> np.ndarray:
    try:
        d = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InputSchemaError(f"cannot parse distance matrix: {exc}") from None
    return d


def write_dataset_csv(path, X, y, labels):
    """Write in the input-table layout; floats use shortest round-trip repr."""
    X = np.asarray(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "y"] + [f"x{j + 1}" for j in range(X.shape[1])])
        for lab, yi, xi in zip(labels, y, X):
            w.writerow([lab, repr(float(yi))] + [repr(float(v)) for v in xi])


def truth_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".truth.json")


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_config_file(path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ValueError(f"cannot parse config file {path}: {exc}") from None
    return dict(parser["config"])


def coerce_config(raw: dict[str, str], target_cls) -> dict:
    """Convert string config values to the field types of a dataclass."""
    types = {f.name: f.type for f in fields(target_cls)}
    out = {}
    for key, value in raw.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        kind = str(types[key])
        if kind == "int":
            out[key] = int(value)
        elif kind == "float":
            out[key] = float(value)
        elif key == "beta":
            out[key] = tuple(float(v) for v in value.replace(",", " ").split())
        else:
            out[key] = value
    return out
