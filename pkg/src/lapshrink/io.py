"""CSV and JSON artifact formats. All indices on disk are 1-based."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import GroupedSample, PrecisionEstimate


class InputFormatError(ValueError):
    """Malformed CSV or JSON input."""


class InconsistentGroupsError(ValueError):
    """Group labels disagree with the declared number of groups."""


def read_csv(path, require_group: bool | None = None):
    """Read a data CSV with a header row.

    Returns ``(data, labels, header)``; ``labels`` is None when there is no
    trailing ``group`` column. ``require_group`` True/False enforces presence
    or absence of that column.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise InputFormatError(f"{path}: empty file (header row required)")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    try:
        [float(h) for h in header]
        raise InputFormatError(f"{path}: first row looks numeric; a header row is required")
    except ValueError:
        pass
    has_group = header[-1].lower() == "group"
    if require_group is True and not has_group:
        raise InputFormatError(f"{path}: final column 'group' is required")
    if require_group is False and has_group:
        raise InputFormatError(f"{path}: unexpected 'group' column for unlabeled input")
    if not body:
        raise InputFormatError(f"{path}: no data rows")
    width = len(header)
    try:
        values = np.array([[float(c) for c in r] for r in body if len(r) == width])
    except ValueError as exc:
        raise InputFormatError(f"{path}: non-numeric entry ({exc})") from None
    if values.shape[0] != len(body):
        raise InputFormatError(f"{path}: ragged rows (expected {width} columns)")
    if not np.all(np.isfinite(values)):
        raise InputFormatError(f"{path}: missing or non-finite values are not supported")
    if has_group:
        g = values[:, -1]
        if np.any(g != np.round(g)):
            raise InputFormatError(f"{path}: group labels must be integers")
        return values[:, :-1], g.astype(int), header[:-1]
    return values, None, header


def grouped_sample_from_csv(path, K: int | None = None) -> GroupedSample:
    data, labels, _ = read_csv(path, require_group=True)
    found = int(labels.max())
    if labels.min() < 1:
        raise InconsistentGroupsError("group labels must start at 1")
    K = found if K is None else int(K)
    if found > K or len(np.unique(labels)) != K:
        raise InconsistentGroupsError(f"labels {sorted(set(labels.tolist()))} inconsistent with K={K}")
    return GroupedSample(data, labels, K)


def write_csv(path, data, labels=None, header=None):
    data = np.asarray(data)
    p = data.shape[1]
    header = list(header) if header is not None else [f"x{i + 1}" for i in range(p)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header + (["group"] if labels is not None else []))
        for r in range(data.shape[0]):
            row = [repr(float(v)) for v in data[r]]
            if labels is not None:
                row.append(str(int(labels[r])))
            w.writerow(row)


def write_membership(path, labels):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["observation", "group"])
        for i, g in enumerate(labels):
            w.writerow([i + 1, int(g)])


def dump_json(obj, path=None) -> str:
    text = json.dumps(_plain(obj), sort_keys=True, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"cannot read JSON {path}: {exc}") from None


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def estimate_to_json(est: PrecisionEstimate, extra: dict | None = None) -> dict:
    groups = []
    p = est.p
    iu, ju = np.triu_indices(p)
    for k in range(est.K):
        keep = (est.theta[k][iu, ju] != 0) | (iu == ju)
        entries = [[int(i) + 1, int(j) + 1, float(est.theta[k, i, j]), float(est.omega[k, i, j])]
                   for i, j in zip(iu[keep], ju[keep])]
        groups.append({"group": k + 1, "entries": entries})
    out = {
        "K": est.K,
        "p": p,
        "groups": groups,
        "convergence": {
            "iterations": int(est.iterations),
            "final_residual": float(est.final_residual),
            "converged": bool(est.converged),
        },
    }
    if est.blocks is not None:
        out["blocks"] = [[i + 1 for i in b] for b in est.blocks]
    if extra:
        out.update(extra)
    return out


def estimate_from_json(obj) -> PrecisionEstimate:
    try:
        K, p = int(obj["K"]), int(obj["p"])
        theta = np.zeros((K, p, p))
        omega = np.zeros((K, p, p))
        for g in obj["groups"]:
            k = int(g["group"]) - 1
            for i, j, t, o in g["entries"]:
                i, j = int(i) - 1, int(j) - 1
                theta[k, i, j] = theta[k, j, i] = t
                omega[k, i, j] = omega[k, j, i] = o
        conv = obj.get("convergence", {})
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputFormatError(f"malformed estimate JSON: {exc}") from None
    return PrecisionEstimate(theta=theta, omega=omega, iterations=conv.get("iterations", 0),
                             converged=conv.get("converged", True),
                             final_residual=conv.get("final_residual", 0.0))


def truth_to_json(omegas, supports, means, meta=None) -> dict:
    omegas = np.asarray(omegas)
    K, p, _ = omegas.shape
    edges = []
    for k in range(K):
        i, j = np.nonzero(np.triu(supports[k], 1))
        edges.append([[int(a) + 1, int(b) + 1] for a, b in zip(i, j)])
    return {"K": K, "p": p, "omegas": omegas, "supports": edges, "means": means,
            "meta": meta or {}}


def truth_from_json(obj):
    try:
        om = np.asarray(obj["omegas"], dtype=float)
    except (KeyError, ValueError) as exc:
        raise InputFormatError(f"malformed truth JSON: {exc}") from None
    if om.ndim != 3:
        raise InputFormatError("truth omegas must be a K x p x p array")
    return om
