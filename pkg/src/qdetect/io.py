"""JSON ensemble/solution files and sweep CSV output.

Complex entries are stored as ``[re, im]`` pairs. An ensemble file looks like::

    {"dim": 2,
     "states": [{"matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]], "prior": 0.5, "q": 0.9},
                ...]}
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .linalg import UncertainEnsemble, hermitian
from .scenarios import CRITERIA, SWEEP_REALIZATIONS, SweepRecord

__all__ = [
    "InputError",
    "encode_matrix",
    "decode_matrix",
    "ensemble_to_dict",
    "ensemble_from_dict",
    "read_ensemble",
    "write_ensemble",
    "read_solution",
    "write_solution",
    "sweep_header",
    "write_sweep_csv",
    "three_state_ensemble",
    "example_path",
]

PARSE_HERMITIAN_ATOL = 1e-9


class InputError(ValueError):
    """Malformed input file; the message names the offending line or field."""


def encode_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(obj, n: int, where: str) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != n:
        raise InputError(f"{where}: expected {n} rows")
    out = np.empty((n, n), dtype=complex)
    for j, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != n:
            raise InputError(f"{where}[{j}]: expected {n} entries")
        for k, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in z)):
                raise InputError(f"{where}[{j}][{k}]: expected a [re, im] pair of numbers")
            out[j, k] = complex(z[0], z[1])
    return out


def ensemble_to_dict(ensemble: UncertainEnsemble) -> dict:
    return {
        "dim": ensemble.dim,
        "states": [
            {"matrix": encode_matrix(s), "prior": float(p), "q": float(q)}
            for s, p, q in zip(ensemble.states, ensemble.priors, ensemble.bounds)
        ],
    }


def _number(entry: dict, key: str, where: str) -> float:
    v = entry.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise InputError(f"{where}.{key}: expected a number")
    return float(v)


def ensemble_from_dict(doc) -> UncertainEnsemble:
    if not isinstance(doc, dict):
        raise InputError("top level: expected an object")
    n = doc.get("dim")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError("dim: expected a positive integer")
    entries = doc.get("states")
    if not isinstance(entries, list) or not entries:
        raise InputError("states: expected a non-empty list")
    mats, priors, bounds = [], [], []
    for i, e in enumerate(entries):
        where = f"states[{i}]"
        if not isinstance(e, dict):
            raise InputError(f"{where}: expected an object")
        mat = decode_matrix(e.get("matrix"), n, f"{where}.matrix")
        try:
            mats.append(hermitian(mat, atol=PARSE_HERMITIAN_ATOL))
        except ValueError as exc:
            raise InputError(f"{where}.matrix: {exc}") from None
        priors.append(_number(e, "prior", where))
        bounds.append(_number(e, "q", where))
    try:
        return UncertainEnsemble(np.array(mats), priors, bounds)
    except ValueError as exc:
        raise InputError(f"states: {exc}") from None


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def read_ensemble(path) -> UncertainEnsemble:
    doc = _load_json(path)
    try:
        return ensemble_from_dict(doc)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _dumps(obj, indent: int = 0) -> str:
    """JSON with one matrix row per line."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = [f'{pad}  {json.dumps(k)}: {_dumps(v, indent + 2).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list) and obj and isinstance(obj[0], list) and obj[0] and isinstance(obj[0][0], list) \
            and obj[0][0] and not isinstance(obj[0][0][0], list):
        rows = [pad + "  " + json.dumps(r) for r in obj]
        return pad + "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        return pad + "[\n" + ",\n".join(_dumps(v, indent + 2) for v in obj) + "\n" + pad + "]"
    return pad + json.dumps(obj)


def write_ensemble(ensemble: UncertainEnsemble, path):
    Path(path).write_text(_dumps(ensemble_to_dict(ensemble)) + "\n")


def write_solution(path, criterion: str, povm_ops: np.ndarray, dual: np.ndarray, value: float,
                   bounds: Iterable[float] | None = None, regime: str | None = None):
    doc = {
        "criterion": criterion,
        "dim": int(np.asarray(dual).shape[0]),
        "value": float(value),
        "povm": [encode_matrix(o) for o in povm_ops],
        "dual": encode_matrix(dual),
    }
    if bounds is not None:
        doc["bounds"] = [float(b) for b in bounds]
    if regime is not None:
        doc["regime"] = regime
    Path(path).write_text(_dumps(doc) + "\n")


def read_solution(path) -> dict:
    """Parse a solution file into ``criterion``, ``povm`` (m, n, n), ``dual`` and optional ``bounds``."""
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level: expected an object")
    crit = doc.get("criterion")
    if crit not in ("nominal", "worst", "average"):
        raise InputError(f"{path}: criterion: expected nominal, worst or average")
    n = doc.get("dim")
    if not isinstance(n, int) or n < 1:
        raise InputError(f"{path}: dim: expected a positive integer")
    ops = doc.get("povm")
    if not isinstance(ops, list) or not ops:
        raise InputError(f"{path}: povm: expected a non-empty list")
    povm = np.array([decode_matrix(o, n, f"povm[{i}]") for i, o in enumerate(ops)])
    dual = decode_matrix(doc.get("dual"), n, "dual")
    out = {"criterion": crit, "povm": povm, "dual": dual, "value": doc.get("value")}
    if "bounds" in doc:
        b = doc["bounds"]
        if not isinstance(b, list) or len(b) != len(ops):
            raise InputError(f"{path}: bounds: expected {len(ops)} numbers")
        out["bounds"] = np.array(b, dtype=float)
    return out


def sweep_header() -> list[str]:
    cols = ["q"]
    for crit in CRITERIA:
        cols += [f"pd_{crit}_{r.label}" for r in SWEEP_REALIZATIONS]
    return cols + ["dist_wc_nom", "dist_avg_nom", "diff_wc", "diff_avg", "status"]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_sweep_csv(rows: list[SweepRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sweep_header())
        for r in rows:
            line = [_fmt(r.q)]
            for crit in CRITERIA:
                line += [_fmt(r.values.get((crit, real.label), float("nan"))) for real in SWEEP_REALIZATIONS]
            line += [_fmt(v) for v in (r.dist_wc_nom, r.dist_avg_nom, r.diff_wc, r.diff_avg)]
            line.append(r.status)
            w.writerow(line)


def example_path() -> Path:
    return Path(str(resources.files("qdetect") / "data" / "three_state.json"))


def three_state_ensemble(q: float = 1.0) -> UncertainEnsemble:
    """The bundled three-state qutrit ensemble with uniform mixing bound `q`."""
    return read_ensemble(example_path()).with_bounds(q)
