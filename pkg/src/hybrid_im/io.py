"""File formats: JSON models and reports, CSV point sets.

JSON floats use the shortest exact repr and CSV floats 17 significant digits,
so both round-trip bit for bit.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .approximators import HybridModel, NnParams, PolyParams
from .errors import ModelFormatError
from .sampling import CollocationSet, TestSet

FORMAT_VERSION = 1


def _f17(v: float) -> str:
    return format(float(v), ".17g")


class _Encoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        return super().iterencode(_clean(o), _one_shot)


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if np.isfinite(v) else str(v)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def dumps(obj) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ------------------------------------------------------------------ models

def model_to_dict(model) -> dict:
    if isinstance(model, HybridModel):
        meta = dict(kind="hybrid", family=model.poly.family, h=model.poly.h, L=model.nn.L,
                    r=model.r.tolist(), N=model.N, M=model.M)
    elif isinstance(model, NnParams):
        meta = dict(kind="nn", family=None, h=None, L=model.L, r=None, N=model.N, M=model.M)
    elif isinstance(model, PolyParams):
        meta = dict(kind="poly", family=model.family, h=model.h, L=None, r=None, N=model.N, M=model.M)
    else:
        raise ModelFormatError(f"cannot serialize {type(model).__name__}")
    return {"format_version": FORMAT_VERSION, **meta, "params": model.flat().tolist()}


def model_from_dict(d: dict):
    try:
        kind, N, M = d["kind"], int(d["N"]), int(d["M"])
        params = np.asarray(d["params"], dtype=float)
        if kind == "poly":
            m = PolyParams.zeros(d["family"], N, M, int(d["h"]))
        elif kind == "nn":
            m = NnParams.zeros(N, M, int(d["L"]))
        elif kind == "hybrid":
            m = HybridModel(PolyParams.zeros(d["family"], N, M, int(d["h"])),
                            NnParams.zeros(N, M, int(d["L"])), np.asarray(d["r"], float))
        else:
            raise ModelFormatError(f"unknown model kind {kind!r}")
        if params.size != m.flat().size:
            raise ModelFormatError(f"expected {m.flat().size} parameters, got {params.size}")
        return m.with_flat(params)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model document: {exc}") from exc


def save_model(path, model):
    write_json(path, model_to_dict(model))


def load_model(path):
    p = Path(path)
    if not p.is_file():
        raise ModelFormatError(f"model file not found: {p}")
    try:
        d = read_json(p)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{p} is not valid JSON: {exc}") from exc
    return model_from_dict(d)


# ------------------------------------------------------------------ CSV

def write_csv(path, header, rows, comment: str | None = None):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.atleast_2d(rows):
            w.writerow([_f17(v) for v in row])


def read_csv(path):
    """Returns (comment dict, header, array)."""
    meta, header, rows = {}, None, []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = v
                continue
            vals = next(csv.reader([line]))
            if header is None:
                header = vals
            elif vals:
                rows.append([float(v) for v in vals])
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header or []))
    return meta, header, arr


def write_collocation(path, cset: CollocationSet):
    M = cset.interior.shape[1]
    rows = np.vstack([np.column_stack([cset.interior, np.zeros(cset.Q)]),
                      np.column_stack([cset.boundary, np.ones(cset.R)])])
    write_csv(path, [f"y_{m + 1}" for m in range(M)] + ["on_boundary"], rows,
              f"provenance={cset.provenance} seed={cset.seed}")


def read_collocation(path) -> CollocationSet:
    meta, header, arr = read_csv(path)
    mask = arr[:, -1] > 0.5
    return CollocationSet(arr[~mask, :-1], arr[mask, :-1], meta.get("provenance", ""), int(meta.get("seed", 0)))


def write_test_set(path, tset: TestSet):
    M, N = tset.Y.shape[1], tset.X.shape[1]
    write_csv(path, [f"y_{m + 1}" for m in range(M)] + [f"x_{n + 1}" for n in range(N)],
              np.hstack([tset.Y, tset.X]), f"provenance={tset.source} seed={tset.seed}")


def read_test_set(path, M: int) -> TestSet:
    meta, header, arr = read_csv(path)
    return TestSet(arr[:, :M], arr[:, M:], meta.get("provenance", ""), int(meta.get("seed", 0)))
