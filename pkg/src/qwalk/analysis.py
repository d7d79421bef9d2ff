"""Figures of merit for correlation matrices, delay scans and device calibration."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .correlations import CorrelationMatrix, PortEfficiencies, partial_correlations
from .evolution import propagator
from .lattice import (
    WaveguideLattice,
    hamiltonian,
    model_coupling,
    nearest_neighbour_mask,
)

__all__ = [
    "UndefinedVisibilityError",
    "similarity",
    "hom_visibility",
    "gaussian_overlap",
    "HOMScan",
    "hom_scan",
    "classical_intensities",
    "CalibrationProblem",
    "CalibrationResult",
    "DEFAULT_BOUNDS",
    "calibrate",
]

log = logging.getLogger(__name__)


class UndefinedVisibilityError(ValueError):
    """The distinguishable-photon rate at the monitored entry is zero."""


def _gamma(m) -> np.ndarray:
    return m.gamma if isinstance(m, CorrelationMatrix) else np.asarray(m, dtype=float)


def similarity(a, b) -> float:
    """Overlap ``(sum sqrt(a*b))^2 / (sum a * sum b)`` over unordered output pairs.

    Sums run over the upper triangle (diagonal included), i.e. over distinct
    detection events, so two normalised matrices are compared as distributions.
    """
    ga, gb = _gamma(a), _gamma(b)
    if ga.shape != gb.shape:
        raise ValueError(f"shape mismatch: {ga.shape} vs {gb.shape}")
    if np.any(ga < 0) or np.any(gb < 0):
        raise ValueError("correlation matrices must be non-negative")
    iu = np.triu_indices(ga.shape[0])
    xa, xb = ga[iu], gb[iu]
    sa, sb = xa.sum(), xb.sum()
    if sa == 0 or sb == 0:
        raise ValueError("cannot compare against an all-zero matrix")
    return float(np.sum(np.sqrt(xa * xb)) ** 2 / (sa * sb))


def _entry(output) -> tuple[int, int]:
    if isinstance(output, (tuple, list)):
        q, r = output
        return int(q), int(r)
    return int(output), int(output)


def hom_visibility(q_mat, d_mat, output) -> float:
    """``(G - G') / G'`` at one output site (diagonal) or output pair."""
    i, j = _entry(output)
    g, gd = _gamma(q_mat)[i, j], _gamma(d_mat)[i, j]
    if gd == 0:
        raise UndefinedVisibilityError(f"distinguishable rate vanishes at output {(i, j)}")
    return float((g - gd) / gd)


def gaussian_overlap(delays, coherence_time: float) -> np.ndarray:
    """Wavepacket overlap ``exp(-tau^2 / (2 coherence_time^2))`` for relative delays ``tau``."""
    if not coherence_time > 0:
        raise ValueError(f"coherence time must be positive, got {coherence_time}")
    tau = np.asarray(delays, dtype=float)
    return np.exp(-(tau**2) / (2.0 * coherence_time**2))


@dataclass(frozen=True, eq=False)
class HOMScan:
    delays: np.ndarray
    coincidences: np.ndarray
    visibility: float
    entry: tuple[int, int]
    coherence_time: float
    peak_indist: float = 1.0


def hom_scan(
    p,
    q: int,
    r: int,
    output,
    coherence_time: float,
    delays: Sequence[float],
    peak_indist: float = 1.0,
) -> HOMScan:
    """Coincidence rate at ``output`` while the relative delay is varied.

    The overlap at delay ``tau`` is ``peak_indist * gaussian_overlap(tau)``, so
    ``peak_indist`` below one models residual distinguishability of the source.
    The reported visibility compares zero delay with fully distinguishable photons.
    """
    overlap = peak_indist * gaussian_overlap(delays, coherence_time)
    i, j = _entry(output)
    rates = np.array([partial_correlations(p, q, r, float(o)).gamma[i, j] for o in overlap])
    peak = partial_correlations(p, q, r, peak_indist).gamma
    dist = partial_correlations(p, q, r, 0.0).gamma
    return HOMScan(
        delays=np.asarray(delays, dtype=float),
        coincidences=rates,
        visibility=hom_visibility(peak, dist, (i, j)),
        entry=(i, j),
        coherence_time=float(coherence_time),
        peak_indist=float(peak_indist),
    )


def classical_intensities(
    lattice: WaveguideLattice, inputs: Sequence[int], efficiencies: PortEfficiencies | None = None
) -> np.ndarray:
    """Detected single-photon (or classical) output distributions, one row per input site."""
    u = propagator(hamiltonian(lattice), lattice.length).u
    inputs = np.asarray(inputs, dtype=int)
    out = np.abs(u[:, inputs].T) ** 2
    if efficiencies is not None:
        out = out * efficiencies.eta_in[inputs, None] * efficiencies.eta_out[None, :]
    return out


DEFAULT_BOUNDS = {
    "c1": (0.01, 5.0),
    "decay": (0.5, 30.0),
    "couplings": (0.0, 5.0),
    "beta": (-5.0, 5.0),
    "eta_in": (0.01, 1.0),
    "eta_out": (0.01, 1.0),
}


@dataclass
class CalibrationProblem:
    """Observed output distributions keyed by input site (index or label).

    ``free_parameters`` picks from ``c1`` and ``decay`` (distance model),
    ``couplings`` (every nonzero coupling individually), ``beta`` (offsets
    relative to a pinned gauge site), ``eta_in`` and ``eta_out``.
    """

    observed: Mapping
    free_parameters: tuple[str, ...] = ("c1",)
    bounds: dict = field(default_factory=dict)
    tolerance: float = 1e-10

    def __post_init__(self):
        for key, vec in self.observed.items():
            vec = np.asarray(vec, dtype=float)
            if np.any(vec < 0) or vec.sum() > 1 + 1e-9:
                raise ValueError(
                    f"observed distribution for input {key!r} must be non-negative and sum to <= 1"
                )
        unknown = set(self.free_parameters) - set(DEFAULT_BOUNDS)
        if unknown:
            raise ValueError(f"unknown free parameters: {sorted(unknown)}")
        if "couplings" in self.free_parameters and {"c1", "decay"} & set(self.free_parameters):
            raise ValueError("'couplings' cannot be combined with model parameters 'c1'/'decay'")


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    lattice: WaveguideLattice
    efficiencies: PortEfficiencies
    parameters: dict
    residual: float
    initial_residual: float
    converged: bool
    evaluations: int
    starts: int

    def report(self) -> dict:
        return {
            "residual": self.residual,
            "initial_residual": self.initial_residual,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "starts": self.starts,
            "parameters": self.parameters,
        }


class _Parametrization:
    """Maps a flat parameter vector onto lattice couplings, betas and efficiencies."""

    def __init__(self, template: WaveguideLattice, eff: PortEfficiencies, groups, bounds):
        self.template = template
        self.eff = eff
        self.groups = tuple(groups)
        n = template.n
        if {"c1", "decay"} & set(groups) and template.model is None:
            raise ValueError("fitting 'c1' or 'decay' needs a template built from a coupling model")
        self.distances = template.distances()
        self.nearest = nearest_neighbour_mask(self.distances)
        iu = np.triu_indices(n, k=1)
        nz = template.coupling[iu] != 0
        self.coupling_idx = (iu[0][nz], iu[1][nz])
        labels = template.labels
        self.gauge = labels.index("C") if "C" in labels else 0
        self.free_beta = [i for i in range(n) if i != self.gauge]

        self.names: list[str] = []
        x0, lo, hi = [], [], []
        for g in self.groups:
            b = bounds.get(g, DEFAULT_BOUNDS[g])
            if g == "c1":
                vals, names = [template.model.c_ref], ["c1"]
            elif g == "decay":
                vals, names = [template.model.decay_length], ["decay_um"]
            elif g == "couplings":
                vals = list(template.coupling[self.coupling_idx])
                names = [f"C[{labels[a]},{labels[b]}]" for a, b in zip(*self.coupling_idx)]
            elif g == "beta":
                vals = [template.beta[i] - template.beta[self.gauge] for i in self.free_beta]
                names = [f"beta[{labels[i]}]-beta[{labels[self.gauge]}]" for i in self.free_beta]
            else:
                vals = list(getattr(eff, g))
                names = [f"{g}[{lab}]" for lab in labels]
            x0 += vals
            self.names += names
            lo += [b[0]] * len(vals)
            hi += [b[1]] * len(vals)
        self.x0 = np.array(x0, dtype=float)
        self.lo = np.array(lo, dtype=float)
        self.hi = np.array(hi, dtype=float)

    def unpack(self, x):
        t = self.template
        model, coupling, beta = t.model, t.coupling, t.beta
        eta_in, eta_out = self.eff.eta_in, self.eff.eta_out
        pos = 0
        for g in self.groups:
            if g == "c1":
                model = dataclasses.replace(model, c_ref=float(x[pos]))
                pos += 1
            elif g == "decay":
                model = dataclasses.replace(model, decay_length=float(x[pos]))
                pos += 1
            elif g == "couplings":
                k = self.coupling_idx[0].size
                coupling = np.zeros_like(t.coupling)
                coupling[self.coupling_idx] = x[pos:pos + k]
                coupling = coupling + coupling.T
                pos += k
            elif g == "beta":
                k = len(self.free_beta)
                beta = np.array(t.beta)
                beta[self.free_beta] = t.beta[self.gauge] + x[pos:pos + k]
                pos += k
            elif g == "eta_in":
                eta_in = np.array(x[pos:pos + t.n])
                pos += t.n
            elif g == "eta_out":
                eta_out = np.array(x[pos:pos + t.n])
                pos += t.n
        if {"c1", "decay"} & set(self.groups):
            coupling = model_coupling(self.distances, model, t.pin_nearest, self.nearest)
        return model, coupling, beta, eta_in, eta_out

    def forward(self, x, inputs):
        _, coupling, beta, eta_in, eta_out = self.unpack(x)
        h = np.array(coupling)
        h[np.diag_indices(self.template.n)] = beta
        u = propagator(h, self.template.length).u
        return np.abs(u[:, inputs].T) ** 2 * eta_in[inputs, None] * eta_out[None, :]

    def build(self, x):
        model, coupling, beta, eta_in, eta_out = self.unpack(x)
        lattice = self.template.replace(coupling=coupling, beta=beta, model=model)
        return lattice, PortEfficiencies(eta_in, eta_out)


def calibrate(
    problem: CalibrationProblem,
    lattice_template: WaveguideLattice,
    efficiencies: PortEfficiencies | None = None,
    restarts: int = 16,
    seed: int = 0,
    method: str = "nelder-mead",
    max_evaluations: int = 100_000,
    threads: int = 1,
) -> CalibrationResult:
    """Fit lattice and port parameters to observed single-photon output distributions.

    Minimises ``sum (eta_out[q'] |U[q', q]|^2 eta_in[q] - observed[q][q'])^2``
    by local optimisation from the template parameters and from ``restarts``
    points drawn uniformly inside the bounds. ``method`` is ``"nelder-mead"``
    (derivative free) or ``"least-squares"`` (finite-difference trust region).

    The result is flagged ``converged`` when the best residual is within
    ``problem.tolerance``; otherwise the best point found is still returned.
    """
    t = lattice_template
    eff = efficiencies if efficiencies is not None else PortEfficiencies.ideal(t.n)
    inputs = np.array([t.index(k) for k in problem.observed], dtype=int)
    observed = np.array([np.asarray(v, dtype=float) for v in problem.observed.values()])
    if observed.shape != (inputs.size, t.n):
        raise ValueError(f"observed distributions must have shape ({inputs.size}, {t.n})")

    par = _Parametrization(t, eff, problem.free_parameters, problem.bounds)
    nparams = par.x0.size
    if observed.size < nparams:
        raise ValueError(f"under-determined: {observed.size} observations for {nparams} parameters")
    if np.any(par.x0 < par.lo) or np.any(par.x0 > par.hi):
        raise ValueError("template parameters lie outside the calibration bounds")

    def residuals(x):
        return (par.forward(x, inputs) - observed).ravel()

    def objective(x):
        return float(np.sum(residuals(x) ** 2))

    rng = np.random.Generator(np.random.PCG64(seed))
    starts = [par.x0] + [rng.uniform(par.lo, par.hi) for _ in range(restarts)]
    bounds = list(zip(par.lo, par.hi))

    def run(x_start, xatol, fatol, maxfev):
        if method == "nelder-mead":
            res = optimize.minimize(
                objective,
                x_start,
                method="Nelder-Mead",
                bounds=bounds,
                options={"xatol": xatol, "fatol": fatol, "maxfev": maxfev, "adaptive": nparams > 3},
            )
            return res.x, float(res.fun), int(res.nfev)
        if method == "least-squares":
            res = optimize.least_squares(
                residuals, x_start, bounds=(par.lo, par.hi), x_scale="jac",
                xtol=xatol, ftol=max(fatol, 1e-15), gtol=1e-15, max_nfev=maxfev,
            )
            return res.x, float(np.sum(res.fun**2)), int(res.nfev)
        raise ValueError(f"unknown method {method!r}")

    # coarse screen of every start, then a tight polish of the best one
    def screen(x_start):
        return run(x_start, 1e-6, 1e-12, min(max_evaluations, 200 * (nparams + 1)))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(screen, starts))
    else:
        runs = [screen(x) for x in starts]
    best = min(range(len(runs)), key=lambda k: (runs[k][1], k))
    x_best, f_best, _ = runs[best]
    polished = run(x_best, 1e-12, max(1e-10 * f_best, 1e-300), max_evaluations)
    runs.append(polished)
    if polished[1] <= f_best:
        x_best, f_best = polished[0], polished[1]
    initial = objective(par.x0)
    if f_best > initial:
        x_best, f_best = par.x0, initial
    lattice, fitted_eff = par.build(x_best)
    log.debug("calibration: best start %d of %d, residual %.3g", best, len(runs), f_best)
    return CalibrationResult(
        lattice=lattice,
        efficiencies=fitted_eff,
        parameters={name: float(v) for name, v in zip(par.names, x_best)},
        residual=f_best,
        initial_residual=initial,
        converged=f_best <= problem.tolerance,
        evaluations=sum(r[2] for r in runs),
        starts=len(starts),
    )
