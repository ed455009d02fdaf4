"""File formats: population CSVs, JSON configs, JSON reports, histograms.

Data files hold one population each: a header row ``x1,...,xd`` followed by
one observation per row (``d`` columns for vector observations, one column
for scalars and counts).  Floats are written with shortest round-trip
formatting, so a dataset written and re-read reproduces the in-memory
arrays exactly.

Configs are a single strict JSON document; unknown fields anywhere are
rejected so that typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import ConfigError, InputError
from .mle import HypothesisSpec
from .models import ModelSpec, build_model
from .simharness import StudyConfig
from .windows import GroupingScheme

_TOP_KEYS = {"model", "scheme", "hyp", "study"}
_MODEL_KEYS = {"name", "params"}
_SCHEME_KEYS = {"G", "n"}
_HYP_KEYS = {"r"}
_STUDY_KEYS = {
    "theta0",
    "replicates",
    "seed",
    "limit_law_draws",
    "thresholds",
    "kind",
    "acceptance",
}
_ACCEPTANCE_KEYS = {
    "ks_level",
    "q_cov_sigma",
    "mle_cov_sigma",
    "exceedance_sigma",
}

DEFAULT_ACCEPTANCE = {
    "ks_level": 0.01,
    "q_cov_sigma": 3.0,
    "mle_cov_sigma": 3.0,
    "exceedance_sigma": 3.0,
}


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} fields: {sorted(unknown)}")


def load_config(path) -> dict:
    """Read and structurally validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {p}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(cfg, _TOP_KEYS, "top-level")
    if "model" in cfg:
        _reject_unknown(cfg["model"], _MODEL_KEYS, "model")
    if "scheme" in cfg:
        _reject_unknown(cfg["scheme"], _SCHEME_KEYS, "scheme")
    if "hyp" in cfg:
        _reject_unknown(cfg["hyp"], _HYP_KEYS, "hyp")
    if "study" in cfg:
        _reject_unknown(cfg["study"], _STUDY_KEYS, "study")
        if "acceptance" in cfg["study"]:
            _reject_unknown(cfg["study"]["acceptance"], _ACCEPTANCE_KEYS, "acceptance")
    return cfg


def model_from_config(cfg: dict) -> ModelSpec:
    if "model" not in cfg:
        raise ConfigError("config is missing the 'model' section")
    section = cfg["model"]
    if "name" not in section:
        raise ConfigError("model section is missing 'name'")
    try:
        return build_model(section["name"], section.get("params", {}))
    except InputError as exc:
        raise ConfigError(str(exc)) from exc


def scheme_from_config(cfg: dict, n_from_files: Optional[list[int]] = None) -> GroupingScheme:
    if "scheme" not in cfg:
        raise ConfigError("config is missing the 'scheme' section")
    section = cfg["scheme"]
    if "G" not in section:
        raise ConfigError("scheme section is missing 'G'")
    n = section.get("n")
    if n is None:
        if n_from_files is None:
            raise ConfigError(
                "scheme section has no 'n' and no data files were given"
            )
        n = n_from_files
    elif n_from_files is not None and list(n) != list(n_from_files):
        raise ConfigError(
            f"scheme 'n' {list(n)} does not match data file sizes {n_from_files}"
        )
    try:
        return GroupingScheme(G=int(section["G"]), n=tuple(int(v) for v in n))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scheme: {exc}") from exc
    except InputError as exc:
        raise ConfigError(str(exc)) from exc


def hyp_from_config(cfg: dict) -> HypothesisSpec:
    if "hyp" not in cfg:
        raise ConfigError("config is missing the 'hyp' section")
    section = cfg["hyp"]
    if "r" not in section:
        raise ConfigError("hyp section is missing 'r'")
    return HypothesisSpec(r=int(section["r"]))


def study_from_config(
    cfg: dict, seed_override: Optional[int] = None
) -> StudyConfig:
    model = model_from_config(cfg)
    scheme = scheme_from_config(cfg)
    hyp = hyp_from_config(cfg)
    section = cfg.get("study")
    if section is None:
        raise ConfigError("config is missing the 'study' section")
    for required in ("theta0", "replicates", "seed"):
        if required not in section:
            raise ConfigError(f"study section is missing {required!r}")
    seed = int(section["seed"]) if seed_override is None else int(seed_override)
    thresholds = section.get("thresholds")
    if thresholds is not None:
        thresholds = tuple(tuple(float(v) for v in row) for row in thresholds)
    try:
        return StudyConfig(
            model=model,
            theta0=np.asarray(section["theta0"], dtype=np.float64),
            scheme=scheme,
            hyp=hyp,
            replicates=int(section["replicates"]),
            seed=seed,
            limit_law_draws=int(section.get("limit_law_draws", 100_000)),
            thresholds=thresholds,
            kind=section.get("kind", "lr"),
        )
    except InputError as exc:
        raise ConfigError(str(exc)) from exc


def acceptance_from_config(cfg: dict) -> dict:
    out = dict(DEFAULT_ACCEPTANCE)
    section = cfg.get("study", {}).get("acceptance", {})
    out.update({k: float(v) for k, v in section.items()})
    return out


def read_population_csv(path, columns: int) -> np.ndarray:
    """Read one population file; returns (n,) or (n, d) float64."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read data file {p}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise InputError(f"data file {p} is empty")
    expected_header = [f"x{i + 1}" for i in range(columns)]
    if [h.strip() for h in rows[0]] != expected_header:
        raise InputError(
            f"data file {p} has header {rows[0]}, expected {expected_header}"
        )
    body = rows[1:]
    if not body:
        raise InputError(f"data file {p} has no observations")
    try:
        values = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"data file {p} has a malformed value: {exc}") from exc
    if values.shape[1] != columns:
        raise InputError(
            f"data file {p} has {values.shape[1]} columns, expected {columns}"
        )
    return values if columns > 1 else values[:, 0]


def write_population_csv(path, values: np.ndarray) -> None:
    """Write one population file in the format read_population_csv expects."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    header = ",".join(f"x{i + 1}" for i in range(arr.shape[1]))
    lines = [header]
    for row in arr:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(model: ModelSpec, paths) -> list[np.ndarray]:
    """Read population files in order; shapes follow the model's layout."""
    arrays = []
    for path in paths:
        arr = read_population_csv(path, model.data_columns)
        if model.vector_obs and arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        arrays.append(arr)
    return arrays


def sha256_hex(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dumps_report(report: dict) -> str:
    """Canonical JSON serialization: sorted keys, stable float repr."""
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _sanitize(value: Any) -> Any:
    """Replace NaN/inf with string markers so reports stay valid JSON."""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def write_report(report: dict, out_path: Optional[str]) -> str:
    text = dumps_report(_sanitize(report))
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def write_histogram_csv(path, edges: np.ndarray, counts: np.ndarray) -> None:
    lines = ["bin_left,bin_right,count"]
    for left, right, count in zip(edges[:-1], edges[1:], counts):
        lines.append(f"{repr(float(left))},{repr(float(right))},{int(count)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
