"""Text file formats for instances, results, grids, and traces.

Everything is UTF-8 with LF line endings. Floats are written with 17
significant digits so files round-trip losslessly: write -> read -> write
is byte-identical. Each file starts with a single '#'-prefixed metadata
line; timestamps only ever appear there, never in the data body.
"""

import csv
import datetime
import io
import math
from pathlib import Path

import numpy as np

from .operators import SamplingOperator, SamplingPattern
from .problems import ProblemInstance

__all__ = [
    "fmt_float",
    "write_instance",
    "read_instance",
    "write_csv",
    "write_grid_files",
    "write_trace_csv",
]

_INSTANCE_MAGIC = "lowrank-admm-instance"


def fmt_float(x: float) -> str:
    """Format a float at 17 significant digits (lossless round trip)."""
    return f"{float(x):.17g}"


def _fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, (np.floating,)):
        return fmt_float(float(v))
    return str(v)


def write_instance(
    path,
    instance: ProblemInstance,
    *,
    snr_m: float | None = None,
    seed: int | None = None,
) -> None:
    """Write a sampling instance as a header plus one "i j value" line per
    observation, in pattern order.

    ``snr_m`` defaults to the instance's recorded noise level; it and
    ``seed`` are header metadata only (ground truth is never stored).
    """
    op = instance.op
    if not isinstance(op, SamplingOperator):
        raise ValueError("only sampling instances have a triplet file form")
    if snr_m is None and instance.noise is not None:
        snr_m = instance.noise.snr_m
    parts = [f"# {_INSTANCE_MAGIC}", f"m={op.m}", f"n={op.n}", f"d={op.d}"]
    if instance.r_true is not None:
        parts.append(f"r_true={instance.r_true}")
    if snr_m is not None:
        parts.append(f"snr_m={fmt_float(snr_m)}")
    if seed is not None:
        parts.append(f"seed={seed}")
    idx = op.pattern.indices
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(" ".join(parts) + "\n")
        for k in range(op.d):
            fh.write(f"{idx[k, 0]} {idx[k, 1]} {fmt_float(instance.b[k])}\n")


def read_instance(path) -> tuple[ProblemInstance, dict]:
    """Read an instance file; returns the instance and its header metadata.

    The returned instance has no ground truth or noise record (files carry
    observations only); ``r_true`` is taken from the header when present.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = header.lstrip("#").split()
        if not fields or fields[0] != _INSTANCE_MAGIC:
            raise ValueError(f"{path}: not an instance file")
        meta: dict = {}
        for item in fields[1:]:
            key, _, value = item.partition("=")
            if key in ("m", "n", "d", "r_true", "seed"):
                meta[key] = int(value)
            elif key == "snr_m":
                meta[key] = float(value)
            else:
                raise ValueError(f"{path}: unknown header field {key!r}")
        for required in ("m", "n", "d"):
            if required not in meta:
                raise ValueError(f"{path}: header is missing {required!r}")
        rows, cols, vals = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                i, j, v = line.split()
                rows.append(int(i))
                cols.append(int(j))
                vals.append(float(v))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad triplet line") from exc
    if len(vals) != meta["d"]:
        raise ValueError(f"{path}: header says d={meta['d']}, found {len(vals)} triplets")
    pattern = SamplingPattern(
        rows=meta["m"],
        cols=meta["n"],
        indices=np.stack([np.asarray(rows), np.asarray(cols)], axis=1),
    )
    instance = ProblemInstance(
        op=SamplingOperator(pattern),
        b=np.asarray(vals, dtype=np.float64),
        r_true=meta.get("r_true"),
    )
    return instance, meta


def meta_line(meta: dict, timestamp: bool = True) -> str:
    items = dict(meta)
    if timestamp:
        items["created"] = datetime.datetime.now(datetime.timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ"
        )
    return "# " + " ".join(f"{k}={_fmt_value(v)}" for k, v in items.items())


def write_csv(path, meta: dict, fieldnames: list[str], rows) -> None:
    """Write a result CSV: one '#' metadata line, a header row, data rows."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt_value(row.get(k)) for k in fieldnames})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(meta_line(meta) + "\n")
        fh.write(buf.getvalue())


def write_grid_files(path, grid, rates: np.ndarray, meta: dict) -> None:
    """Write a success-rate grid as CSV plus a gnuplot-ready heatmap file.

    The CSV has one row per rank fraction and one column per sampling
    fraction; infeasible cells are "NA". The companion ``.dat`` file holds
    "sampling_frac rank_frac rate" triples in gnuplot block format
    (0 = black, never recovered; 1 = white, always recovered).
    """
    path = Path(path)
    fieldnames = ["rank_frac"] + [fmt_float(s) for s in grid.sampling_fractions]
    rows = []
    for i, rf in enumerate(grid.rank_fractions):
        row = {"rank_frac": fmt_float(rf)}
        for j, sf in enumerate(grid.sampling_fractions):
            v = rates[i, j]
            row[fmt_float(sf)] = "NA" if math.isnan(v) else fmt_float(v)
        rows.append(row)
    write_csv(path, meta, fieldnames, rows)

    dat_path = path.with_suffix(".dat")
    with open(dat_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(meta_line(meta) + "\n")
        fh.write("# success rate per cell: 0=black (never recovered), 1=white (always)\n")
        fh.write("# columns: sampling_frac rank_frac success_rate\n")
        for i, rf in enumerate(grid.rank_fractions):
            for j, sf in enumerate(grid.sampling_fractions):
                v = rates[i, j]
                fh.write(f"{fmt_float(sf)} {fmt_float(rf)} "
                         f"{'nan' if math.isnan(v) else fmt_float(v)}\n")
            fh.write("\n")


def write_trace_csv(path, meta: dict, columns: dict[str, np.ndarray]) -> None:
    """Write per-iteration trace columns keyed by name, one row per k."""
    names = list(columns)
    length = len(next(iter(columns.values())))
    rows = []
    for k in range(length):
        row = {"k": k + 1}
        for name in names:
            v = columns[name][k]
            row[name] = "nan" if math.isnan(v) else fmt_float(v)
        rows.append(row)
    write_csv(path, meta, ["k"] + names, rows)
