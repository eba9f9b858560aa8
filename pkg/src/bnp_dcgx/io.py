"""File formats: CSV datasets, JSON truth/config, JSON-lines traces and DOT graphs."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .model import ClusterParams, Dataset, Sample, Trace, validate_dataset

FLOAT_FMT = ".17g"


def _fmt(v: float) -> str:
    return format(float(v), FLOAT_FMT)


def write_matrix_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_matrix_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidConfig(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidConfig(f"{path}: non-numeric entry ({exc})") from exc
    return header, body.reshape(-1, len(header))


def write_dataset(out_dir, data: Dataset) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = list(data.gene_names) if data.gene_names else [f"g{j + 1}" for j in range(data.p)]
    expr, coords = out / "expr.csv", out / "coords.csv"
    write_matrix_csv(expr, names, data.Y)
    write_matrix_csv(coords, [f"x{k + 1}" for k in range(data.q)], data.X)
    return expr, coords


def read_dataset(expr_csv, coords_csv) -> Dataset:
    names, Y = read_matrix_csv(expr_csv)
    _, X = read_matrix_csv(coords_csv)
    return validate_dataset(Y, X, gene_names=names)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc


def cluster_to_json(c: ClusterParams) -> dict:
    return {"B": c.B.tolist(), "M": c.M.tolist(), "sigma": c.sigma.tolist(),
            "gamma": c.gamma.astype(int).tolist(), "eta": float(c.eta), "phi": float(c.phi)}


def cluster_from_json(d: dict) -> ClusterParams:
    return ClusterParams(B=np.array(d["B"], dtype=float), M=np.array(d["M"], dtype=float),
                         sigma=np.array(d["sigma"], dtype=float),
                         gamma=np.array(d["gamma"], dtype=np.int8),
                         eta=float(d["eta"]), phi=float(d["phi"]))


def write_trace(path, trace: Trace) -> None:
    with open(path, "w") as fh:
        for s in trace.samples:
            rec = {"iteration": int(s.iteration), "xi": s.xi.tolist(),
                   "clusters": [cluster_to_json(c) for c in s.clusters],
                   "loglik": float(s.loglik)}
            fh.write(json.dumps(rec) + "\n")


def read_trace(path, meta_path=None) -> Trace:
    samples = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            samples.append(Sample(iteration=d["iteration"], xi=np.array(d["xi"], dtype=np.int64),
                                  clusters=[cluster_from_json(c) for c in d["clusters"]],
                                  loglik=d.get("loglik", float("nan"))))
    meta = read_json(meta_path) if meta_path is not None and Path(meta_path).exists() else {}
    return Trace(samples=samples, meta=meta)


_RANGE = re.compile(r"^\s*(x\d+)\s*=\s*([-+0-9.eE]+):([-+0-9.eE]+):([-+0-9.eE]+)\s*$")
_FIXED = re.compile(r"^\s*(x\d+)\s*=\s*([-+0-9.eE,\s]+)$")


def _axis_index(name: str, q: int) -> int:
    k = int(name[1:]) - 1
    if not 0 <= k < q:
        raise InvalidConfig(f"covariate {name} out of range for q={q}")
    return k


def parse_grid(spec: str, q: int) -> np.ndarray:
    """Expand ``"x1=0:1:0.1 at x2=0.5"`` into query points (endpoints inclusive).

    Several specs may be joined with ``;`` and a fixed coordinate may list
    several comma-separated values.
    """
    points = []
    for part in spec.split(";"):
        if not part.strip():
            continue
        head, _, tail = part.partition(" at ")
        m = _RANGE.match(head)
        if m is None:
            raise InvalidConfig(f"bad grid range {head!r}; expected x1=start:stop:step")
        k = _axis_index(m.group(1), q)
        start, stop, step = (float(m.group(i)) for i in (2, 3, 4))
        if step <= 0 or stop < start:
            raise InvalidConfig(f"bad grid range {head!r}")
        n_pts = int(np.floor((stop - start) / step + 1e-9)) + 1
        vary = np.round(start + step * np.arange(n_pts), 12)
        fixed = {}
        for item in re.split(r"\s+and\s+|\s*;\s*", tail.strip()) if tail.strip() else []:
            f = _FIXED.match(item)
            if f is None:
                raise InvalidConfig(f"bad fixed coordinate {item!r}")
            fixed[_axis_index(f.group(1), q)] = [float(v) for v in f.group(2).split(",") if v.strip()]
        missing = set(range(q)) - set(fixed) - {k}
        if missing:
            raise InvalidConfig(f"grid leaves covariates {sorted(m_ + 1 for m_ in missing)} unset")
        combos = [dict()]
        for axis, vals in sorted(fixed.items()):
            combos = [{**c, axis: v} for c in combos for v in vals]
        for c in combos:
            for v in vary:
                x = np.empty(q)
                x[k] = v
                for axis, val in c.items():
                    x[axis] = val
                points.append(x)
    if not points:
        raise InvalidConfig("empty grid specification")
    return np.array(points)


def parse_point(text: str, q: int) -> np.ndarray:
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise InvalidConfig(f"bad point {text!r}") from exc
    if x.size != q:
        raise InvalidConfig(f"point {text!r} has {x.size} coordinates, expected {q}")
    return x


MAX_PENWIDTH = 5.0


def to_dot(prob, names, threshold: float, name: str = "G") -> str:
    """A digraph with every node and each edge k -> j whose probability reaches ``threshold``.

    ``prob[j, k]`` is the weight of the edge k -> j; penwidth scales linearly
    up to ``MAX_PENWIDTH`` at probability 1.
    """
    prob = np.asarray(prob, dtype=float)
    p = prob.shape[0]
    lines = [f'digraph "{name}" {{']
    lines += [f'  "{names[j]}";' for j in range(p)]
    for j in range(p):
        for k in range(p):
            w = prob[j, k]
            if j != k and w >= threshold and w > 0:
                lines.append(f'  "{names[k]}" -> "{names[j]}" '
                             f'[penwidth={_fmt(MAX_PENWIDTH * w)}, weight="{_fmt(w)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_EDGE = re.compile(r'^\s*"([^"]+)"\s*->\s*"([^"]+)"\s*\[(.*)\];\s*$')


def parse_dot(text: str) -> dict:
    """Edges of a DOT file written by :func:`to_dot`, as ``{(src, dst): weight}``."""
    edges = {}
    for line in text.splitlines():
        m = _EDGE.match(line)
        if m:
            w = re.search(r'weight="([^"]+)"', m.group(3))
            edges[(m.group(1), m.group(2))] = float(w.group(1)) if w else float("nan")
    return edges
