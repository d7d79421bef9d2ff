"""Command-line front end.

Every command writes its outputs into ``--out`` together with a manifest
(``manifest-<command>.json``) listing the arguments, seed and files, so that
``qwalk replay <manifest>`` regenerates byte-identical outputs.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CalibrationProblem, calibrate, classical_intensities, gaussian_overlap, hom_scan
from .configspace import expand
from .correlations import (
    branch_sum,
    distinguishable_correlations,
    partial_correlations,
    quantum_correlations,
)
from .evolution import propagator
from .io import (
    load_lattice,
    read_json,
    read_matrix_csv,
    save_lattice,
    write_graph_csv,
    write_json,
    write_matrix_csv,
    write_pgm,
    write_propagator_csv,
    write_table_csv,
    write_violation_csv,
)
from .lattice import (
    SWISS_CROSS_BRANCHES,
    CouplingModel,
    build_linear_chain,
    build_swiss_cross,
    hamiltonian,
)
from .nonclassicality import (
    CountMatrix,
    ViolationReport,
    sample_counts,
    violation_matrix,
    violation_significance,
)

log = logging.getLogger("qwalk")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message, outputs=()):
        super().__init__(message)
        self.outputs = list(outputs)


def _parse_sites(lattice, text: str, count: int | None = 2) -> list[int]:
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    if count is not None and len(tokens) != count:
        raise ConfigError(f"expected {count} comma-separated sites, got {text!r}")
    out = []
    for t in tokens:
        try:
            out.append(lattice.index(int(t)) if t.lstrip("-").isdigit() else lattice.index(t))
        except (KeyError, IndexError) as exc:
            raise ConfigError(str(exc)) from None
    return out


def _parse_branches(lattice, text: str | None):
    if text is None:
        return None
    if text == "swiss-cross":
        return {k: list(v) for k, v in SWISS_CROSS_BRANCHES.items()}
    branches = {}
    for part in text.split(";"):
        name, _, members = part.partition("=")
        if not members:
            raise ConfigError(f"malformed branch spec {part!r}; use NAME=site,site;...")
        branches[name.strip()] = [lattice.labels[i] for i in _parse_sites(lattice, members, None)]
    return branches


def _parse_delays(text: str) -> np.ndarray:
    if ":" in text:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num))
    return np.array([float(t) for t in text.split(",")])


def _load_config(args):
    if args.config is None:
        raise ConfigError("this command needs --config")
    try:
        return load_lattice(args.config)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{args.config}: {exc}") from None


def _correlation_for_mode(p, q, r, mode, indist, labels):
    if mode == "quantum":
        return quantum_correlations(p, q, r, labels=labels)
    if mode == "distinguishable":
        return distinguishable_correlations(p, q, r, labels=labels)
    return partial_correlations(p, q, r, indist, labels=labels)


def cmd_preset(args) -> list[Path]:
    if args.kind == "swiss-cross":
        model = CouplingModel(
            c_ref=args.c1, d_ref=min(args.dx, args.dy), decay_length=args.decay_um, cutoff=args.cutoff_um
        )
        lattice = build_swiss_cross(args.dx, args.dy, args.c1, args.beta, args.length_cm, model)
    else:
        model = None
        if args.cutoff_um > args.spacing_um:
            model = CouplingModel(args.c1, args.spacing_um, args.decay_um, args.cutoff_um)
        lattice = build_linear_chain(args.n, args.spacing_um, args.c1, args.beta, args.length_cm, model)
    return [save_lattice(Path(args.out) / args.name, lattice)]


def cmd_correlate(args) -> list[Path]:
    lattice = _load_config(args)
    q, r = _parse_sites(lattice, args.input)
    z = lattice.length if args.z is None else args.z
    p = propagator(hamiltonian(lattice), z)
    labels = lattice.labels
    out = Path(args.out)
    mats = {
        "quantum": quantum_correlations(p, q, r, labels=labels),
        "distinguishable": distinguishable_correlations(p, q, r, labels=labels),
    }
    if args.indist is not None:
        mats["partial"] = partial_correlations(p, q, r, args.indist, labels=labels)
    files = [write_matrix_csv(out / f"{name}.csv", c.gamma, labels) for name, c in mats.items()]
    files += write_propagator_csv(out, p, labels)
    branches = _parse_branches(lattice, args.branches)
    meta = {
        "input": [labels[q], labels[r]],
        "z_cm": z,
        "indistinguishability": args.indist,
        "matrices": {name: c.metadata() | {"unordered_sum": c.total()} for name, c in mats.items()},
    }
    if branches:
        meta["branches"] = branches
        for name, c in mats.items():
            b = branch_sum(c, branches)
            files.append(write_matrix_csv(out / f"branch_{name}.csv", b.gamma, b.labels))
            files += write_violation_csv(out, violation_matrix(b), prefix=f"branch_{name}_")
    files.append(write_json(out / "correlate.json", meta))
    return files


def cmd_violations(args) -> list[Path]:
    out = Path(args.out)
    files = []
    meta = {"seed": args.seed, "resamples": args.resamples, "method": args.method}
    if args.counts is not None:
        try:
            labels, m = read_matrix_csv(args.counts)
            counts = CountMatrix(m, labels=tuple(labels) if labels else None)
        except ValueError as exc:
            raise ConfigError(f"malformed counts file: {exc}") from None
        meta["counts_file"] = str(args.counts)
    else:
        lattice = _load_config(args)
        q, r = _parse_sites(lattice, args.input)
        z = lattice.length if args.z is None else args.z
        p = propagator(hamiltonian(lattice), z)
        c = _correlation_for_mode(p, q, r, args.mode, args.indist, lattice.labels)
        if not args.budget > 0:
            raise ConfigError("--budget must be positive")
        counts = sample_counts(c, args.budget, args.seed)
        files.append(write_matrix_csv(out / "counts.csv", counts.counts, counts.labels))
        meta |= {"budget": args.budget, "mode": args.mode, "input": [lattice.labels[q], lattice.labels[r]]}
        if args.mode == "partial":
            meta["indistinguishability"] = args.indist
    if counts.total > 0:
        report = violation_significance(counts, args.resamples, seed=args.seed, method=args.method)
    elif args.counts is None:
        # a tiny budget can draw no coincidences at all; nothing is significant then
        zeros = np.zeros(counts.counts.shape)
        report = ViolationReport(zeros, np.full(zeros.shape, np.inf), zeros, counts.labels, {"total_counts": 0})
    else:
        raise ConfigError("count matrix is empty; nothing to analyse")
    files += write_violation_csv(out, report)
    labels = report.labels or [str(i) for i in range(counts.n)]
    meta |= report.metadata
    meta["significant_pairs"] = [[labels[a], labels[b]] for a, b in report.significant(args.threshold)]
    meta["threshold_sigma"] = args.threshold
    files.append(write_json(out / "violations.json", meta))
    return files


def cmd_graph(args) -> list[Path]:
    lattice = _load_config(args)
    g = expand(lattice)
    out = Path(args.out)
    files = write_graph_csv(out, g)
    deg = g.degree()
    summary = {
        "sites": lattice.n,
        "vertices": g.m,
        "edges": len(g.edges()),
        "max_degree": int(deg.max()) if deg.size else 0,
        "degree": dict(zip(g.vertex_labels, map(int, deg))),
    }
    files.append(write_json(out / "graph.json", summary))
    return files


def cmd_heatmap(args) -> list[Path]:
    try:
        _, m = read_matrix_csv(args.matrix)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    name = args.name or Path(args.matrix).with_suffix(".pgm").name
    return [write_pgm(Path(args.out) / name, m, scale=args.scale)]


def cmd_intensities(args) -> list[Path]:
    lattice = _load_config(args)
    inputs = _parse_sites(lattice, args.inputs, None) if args.inputs else list(range(lattice.n))
    data = classical_intensities(lattice, inputs)
    if args.noise > 0:
        rng = np.random.Generator(np.random.PCG64(args.seed))
        data = data * (1.0 + args.noise * rng.standard_normal(data.shape))
        data = np.clip(data, 0.0, None)
        data = data / np.maximum(data.sum(axis=1, keepdims=True), 1.0)
    observed = {lattice.labels[i]: row.tolist() for i, row in zip(inputs, data)}
    doc = {"observed": observed, "noise": args.noise, "seed": args.seed}
    return [write_json(Path(args.out) / args.name, doc)]


def cmd_calibrate(args) -> list[Path]:
    template = _load_config(args)
    try:
        doc = read_json(args.data)
        free = tuple(args.free.split(",")) if args.free else tuple(doc.get("free_parameters", ("c1",)))
        bounds = {k: tuple(v) for k, v in doc.get("bounds", {}).items()}
        tol = args.tolerance if args.tolerance is not None else doc.get("tolerance", 1e-10)
        problem = CalibrationProblem(doc["observed"], free, bounds, tol)
        result = calibrate(
            problem, template, restarts=args.restarts, seed=args.seed, method=args.method, threads=args.threads
        )
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"calibration setup: {exc}") from None
    out = Path(args.out)
    report = result.report() | {
        "eta_in": result.efficiencies.eta_in.tolist(),
        "eta_out": result.efficiencies.eta_out.tolist(),
        "method": args.method,
        "seed": args.seed,
    }
    files = [save_lattice(out / "fitted_lattice.json", result.lattice), write_json(out / "fit_report.json", report)]
    if not result.converged:
        raise NumericalFailure(
            f"calibration did not reach tolerance {tol:g} (residual {result.residual:.3g})", files
        )
    return files


def cmd_homscan(args) -> list[Path]:
    lattice = _load_config(args)
    q, r = _parse_sites(lattice, args.input)
    outs = _parse_sites(lattice, args.output, None)
    if len(outs) not in (1, 2):
        raise ConfigError("--output takes one site or a pair of sites")
    entry = (outs[0], outs[-1])
    z = lattice.length if args.z is None else args.z
    p = propagator(hamiltonian(lattice), z)
    delays = _parse_delays(args.delays)
    try:
        scan = hom_scan(p, q, r, entry, args.coherence_fs, delays, args.peak_indist)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    overlap = scan.peak_indist * gaussian_overlap(scan.delays, scan.coherence_time)
    rows = zip(scan.delays, overlap, scan.coincidences)
    files = [write_table_csv(out / "hom_scan.csv", ["delay_fs", "indistinguishability", "coincidence"], rows)]
    meta = {
        "input": [lattice.labels[q], lattice.labels[r]],
        "output": [lattice.labels[entry[0]], lattice.labels[entry[1]]],
        "coherence_fs": scan.coherence_time,
        "peak_indist": scan.peak_indist,
        "visibility": scan.visibility,
        "z_cm": z,
    }
    files.append(write_json(out / "hom_scan.json", meta))
    return files


def cmd_replay(args) -> list[Path]:
    manifest = read_json(args.manifest)
    argv = manifest["argv"]
    code = main(argv)
    if code != 0:
        raise NumericalFailure(f"replayed command exited with {code}")
    return []


COMMANDS = {
    "preset": cmd_preset,
    "correlate": cmd_correlate,
    "violations": cmd_violations,
    "graph": cmd_graph,
    "heatmap": cmd_heatmap,
    "intensities": cmd_intensities,
    "calibrate": cmd_calibrate,
    "homscan": cmd_homscan,
    "replay": cmd_replay,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="lattice config JSON")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qwalk", description="Two-photon quantum walks in waveguide lattices.")
    parser.add_argument("--version", action="version", version=f"qwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", parents=[common], help="write a preset lattice config")
    p.add_argument("kind", choices=["swiss-cross", "chain"])
    p.add_argument("--name", default="lattice.json")
    p.add_argument("--dx", type=float, default=18.0, help="X-arm spacing, um")
    p.add_argument("--dy", type=float, default=19.0, help="Y-arm spacing, um")
    p.add_argument("--n", type=int, default=5, help="chain length")
    p.add_argument("--spacing-um", type=float, default=18.0)
    p.add_argument("--c1", type=float, default=1.5, help="nearest-neighbour coupling, 1/cm")
    p.add_argument("--beta", type=float, default=0.0, help="propagation constant, 1/cm")
    p.add_argument("--length-cm", type=float, default=1.4)
    p.add_argument("--decay-um", type=float, default=6.0)
    p.add_argument("--cutoff-um", type=float, default=30.0)

    p = sub.add_parser("correlate", parents=[common], help="two-photon correlation matrices")
    p.add_argument("--input", required=True, help="input sites, e.g. X1,X4")
    p.add_argument("--indist", type=float, help="also write a partially indistinguishable matrix")
    p.add_argument("--z", type=float, help="override the propagation length, cm")
    p.add_argument("--branches", help="'swiss-cross' or NAME=site,site;NAME=...")

    p = sub.add_parser("violations", parents=[common], help="classical-bound violations in sigma")
    p.add_argument("--counts", help="coincidence count CSV (instead of simulating)")
    p.add_argument("--input", default="0,1")
    p.add_argument("--mode", choices=["quantum", "distinguishable", "partial"], default="quantum")
    p.add_argument("--indist", type=float, default=1.0)
    p.add_argument("--z", type=float)
    p.add_argument("--budget", type=float, default=1e6, help="expected total coincidences")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--method", choices=["bootstrap", "propagation"], default="bootstrap")
    p.add_argument("--threshold", type=float, default=3.0, help="significance threshold, sigma")

    sub.add_parser("graph", parents=[common], help="two-photon configuration-space graph")

    p = sub.add_parser("heatmap", parents=[common], help="render a CSV matrix as 16-bit PGM")
    p.add_argument("matrix")
    p.add_argument("--scale", choices=["max", "unit"], default="max")
    p.add_argument("--name", help="output file name (default: <matrix>.pgm)")

    p = sub.add_parser("intensities", parents=[common], help="single-photon output distributions")
    p.add_argument("--inputs", help="comma-separated input sites (default: all)")
    p.add_argument("--noise", type=float, default=0.0, help="relative Gaussian noise")
    p.add_argument("--name", default="observed.json")

    p = sub.add_parser("calibrate", parents=[common], help="fit a lattice to classical data")
    p.add_argument("--data", required=True, help="observed distributions JSON")
    p.add_argument("--free", help="comma-separated parameter groups, e.g. c1,decay")
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--method", choices=["nelder-mead", "least-squares"], default="nelder-mead")
    p.add_argument("--tolerance", type=float)

    p = sub.add_parser("homscan", parents=[common], help="coincidences versus relative delay")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="monitored site or site pair")
    p.add_argument("--coherence-fs", type=float, required=True)
    p.add_argument("--delays", default="-1000:1000:201", help="start:stop:num or comma list, fs")
    p.add_argument("--peak-indist", type=float, default=1.0)
    p.add_argument("--z", type=float)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    return parser


def _write_manifest(args, argv, files) -> None:
    out = Path(args.out)
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config_path": args.config,
        "seed": args.seed,
        "outputs": sorted(str(Path(f).relative_to(out)) if Path(f).is_relative_to(out) else str(f) for f in files),
        "tool_version": __version__,
    }
    write_json(out / f"manifest-{args.command}.json", manifest)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        files = COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        log.error("%s", exc)
        if exc.outputs and args.command != "replay":
            _write_manifest(args, argv, exc.outputs)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, IndexError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    if args.command != "replay":
        _write_manifest(args, argv, files)
    return 0


if __name__ == "__main__":
    sys.exit(main())
