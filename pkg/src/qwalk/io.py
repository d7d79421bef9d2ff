"""File formats: labelled CSV matrices, JSON documents and 16-bit PGM images.

All writers go through a temporary file in the target directory followed by
a rename, so readers never see partially written outputs.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .lattice import WaveguideLattice, lattice_from_config, lattice_to_config

__all__ = [
    "atomic_write",
    "format_number",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_json",
    "read_json",
    "write_pgm",
    "read_pgm",
    "load_lattice",
    "save_lattice",
    "write_propagator_csv",
    "write_graph_csv",
    "write_violation_csv",
    "write_table_csv",
]


def atomic_write(path, data: bytes | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_matrix_csv(path, matrix, labels=None, col_labels=None) -> Path:
    """Write a matrix with an optional header row and column of labels.

    Floats are written with ``repr`` so values round-trip exactly and output is
    byte-reproducible.
    """
    matrix = np.asarray(matrix)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if labels is not None:
        cols = list(col_labels) if col_labels is not None else list(labels)
        writer.writerow([""] + cols)
        for lab, row in zip(labels, matrix):
            writer.writerow([lab] + [format_number(v) for v in row])
    else:
        for row in matrix:
            writer.writerow([format_number(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> tuple[list[str] | None, np.ndarray]:
    """Read a numeric CSV matrix, with or without a label header row/column.

    Raises
    ------
    ValueError
        For ragged rows or non-numeric cells.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    labels = None
    if not all(_is_number(c) for c in rows[0]):
        labels = rows[0][1:]
        rows = rows[1:]
        body = [row[1:] for row in rows]
    else:
        body = rows
    width = len(body[0]) if body else 0
    values = []
    for i, row in enumerate(body):
        if len(row) != width:
            raise ValueError(f"{path}: row {i} has {len(row)} cells, expected {width}")
        try:
            values.append([float(c) for c in row])
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric cell in row {i}: {exc}") from None
    return labels, np.array(values, dtype=float).reshape(len(values), width)


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_pgm(path, matrix, scale: str = "max") -> Path:
    """Render a matrix as a 16-bit binary PGM, row 0 at the top.

    ``scale="max"`` maps the largest entry to white, ``scale="unit"`` maps 1.0
    to white. Values are clipped to ``[0, 1]`` after scaling and non-finite
    entries render black; the scale factor is recorded in a header comment.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("heatmaps need a 2D matrix")
    m = np.where(np.isfinite(m), m, 0.0)
    if scale == "max":
        top = float(m.max()) if m.size else 0.0
    elif scale == "unit":
        top = 1.0
    else:
        raise ValueError(f"unknown scale {scale!r}")
    if top > 0:
        pixels = np.clip(m / top, 0.0, 1.0)
    else:
        pixels = np.zeros_like(m)
    data = np.round(pixels * 65535).astype(">u2")
    h, w = m.shape
    header = f"P5\n# scale={scale} white={format_number(top)}\n{w} {h}\n65535\n".encode("ascii")
    return atomic_write(path, header + data.tobytes())


def read_pgm(path) -> tuple[np.ndarray, dict]:
    """Read a binary 16-bit PGM written by ``write_pgm``; returns pixels and header comments."""
    raw = Path(path).read_bytes()
    tokens, comments, pos = [], {}, 0
    while len(tokens) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, val = item.partition("=")
                comments[key] = val
            continue
        tokens += line.split()
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    pixels = np.frombuffer(raw[pos:], dtype=dtype, count=w * h).reshape(h, w)
    return pixels.astype(int), comments


def load_lattice(path) -> WaveguideLattice:
    return lattice_from_config(read_json(path))


def save_lattice(path, lattice: WaveguideLattice) -> Path:
    return write_json(path, lattice_to_config(lattice))


def write_propagator_csv(directory, p, labels=None) -> list[Path]:
    """Real and imaginary parts of ``U`` in two CSVs; rows are output sites."""
    directory = Path(directory)
    cols = labels
    return [
        write_matrix_csv(directory / "propagator_real.csv", np.real(p.u), labels, cols),
        write_matrix_csv(directory / "propagator_imag.csv", np.imag(p.u), labels, cols),
    ]


def write_graph_csv(directory, graph) -> list[Path]:
    """Vertex list (label, potential) and edge list (vertex_a, vertex_b, amplitude)."""
    directory = Path(directory)
    labels = graph.vertex_labels
    vbuf = io.StringIO()
    w = csv.writer(vbuf, lineterminator="\n")
    w.writerow(["label", "potential"])
    for lab, pot in zip(labels, graph.potential):
        w.writerow([lab, format_number(pot)])
    ebuf = io.StringIO()
    w = csv.writer(ebuf, lineterminator="\n")
    w.writerow(["vertex_a", "vertex_b", "amplitude"])
    for i, j, amp in graph.edges():
        value = format_number(amp.real) if np.isreal(amp) else repr(complex(amp))
        w.writerow([labels[i], labels[j], value])
    return [
        atomic_write(directory / "vertices.csv", vbuf.getvalue()),
        atomic_write(directory / "edges.csv", ebuf.getvalue()),
    ]


def write_violation_csv(directory, report, prefix: str = "") -> list[Path]:
    directory = Path(directory)
    labels = report.labels
    out = [write_matrix_csv(directory / f"{prefix}v.csv", report.v, labels)]
    if report.sigma is not None:
        out.append(write_matrix_csv(directory / f"{prefix}sigma.csv", report.sigma, labels))
        out.append(
            write_matrix_csv(directory / f"{prefix}sigmas_violated.csv", report.sigmas_violated, labels)
        )
    return out


def write_table_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return atomic_write(path, buf.getvalue())
