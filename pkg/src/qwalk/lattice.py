"""Waveguide lattices and their tight-binding Hamiltonians.

Lengths in the transverse plane are in micrometres, propagation constants and
couplings in inverse centimetres, and the propagation length in centimetres.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Waveguide",
    "CouplingModel",
    "WaveguideLattice",
    "SWISS_CROSS_LABELS",
    "SWISS_CROSS_BRANCHES",
    "nearest_neighbour_mask",
    "model_coupling",
    "lattice_from_model",
    "build_swiss_cross",
    "build_linear_chain",
    "hamiltonian",
    "lattice_to_config",
    "lattice_from_config",
]

SWISS_CROSS_LABELS = ("X1", "X2", "C", "X3", "X4", "Y1", "Y2", "Y3", "Y4")

# left and right halves of the X arm, the whole vertical arm, and the centre
SWISS_CROSS_BRANCHES = {
    "L": ("X1", "X2"),
    "R": ("X3", "X4"),
    "UD": ("Y1", "Y2", "Y3", "Y4"),
    "C": ("C",),
}

# relative tolerance for deciding that a separation equals a site's smallest one
_NEAREST_RTOL = 1e-6


@dataclass(frozen=True)
class Waveguide:
    label: str
    x: float
    y: float


@dataclass(frozen=True)
class CouplingModel:
    """Exponential evanescent coupling ``c_ref * exp(-(d - d_ref) / decay_length)``.

    Separations beyond ``cutoff`` couple with strength zero.
    """

    c_ref: float
    d_ref: float
    decay_length: float = 6.0
    cutoff: float = 30.0

    def __post_init__(self):
        if not self.c_ref > 0:
            raise ValueError(f"c_ref must be positive, got {self.c_ref}")
        if not self.d_ref > 0:
            raise ValueError(f"d_ref must be positive, got {self.d_ref}")
        if not self.decay_length > 0:
            raise ValueError(f"decay_length must be positive, got {self.decay_length}")
        if not self.cutoff >= self.d_ref:
            raise ValueError(
                f"cutoff ({self.cutoff}) must not be smaller than d_ref ({self.d_ref})"
            )

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        c = self.c_ref * np.exp(-(d - self.d_ref) / self.decay_length)
        return np.where(d <= self.cutoff, c, 0.0)


@dataclass(frozen=True, eq=False)
class WaveguideLattice:
    """Named waveguides with propagation constants and a coupling matrix.

    ``model`` and ``pin_nearest`` are kept when the couplings were generated
    from a distance model, so that the lattice can be rebuilt with different
    model parameters (calibration) and written back to the same config.
    """

    sites: tuple[Waveguide, ...]
    beta: np.ndarray
    coupling: np.ndarray
    length: float
    model: CouplingModel | None = None
    pin_nearest: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sites = tuple(self.sites)
        labels = [s.label for s in sites]
        if len(set(labels)) != len(labels):
            raise ValueError(f"site labels must be unique, got {labels}")
        n = len(sites)
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 0:
            beta = np.full(n, float(beta))
        if beta.shape != (n,):
            raise ValueError(f"beta has shape {beta.shape}, expected ({n},)")
        coupling = np.array(self.coupling, dtype=float).reshape(n, n)
        if not np.array_equal(coupling, coupling.T):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(coupling) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        if np.any(coupling < 0):
            raise ValueError("coupling strengths must be non-negative")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        beta.setflags(write=False)
        coupling.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "coupling", coupling)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.sites]

    @property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.sites], dtype=float).reshape(-1, 2)

    def distances(self) -> np.ndarray:
        pos = self.positions
        return np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)

    def index(self, site) -> int:
        """Resolve a site label or integer index to an integer index."""
        if isinstance(site, (int, np.integer)):
            if not 0 <= site < self.n:
                raise IndexError(f"site index {site} out of range for {self.n} sites")
            return int(site)
        try:
            return self._index[site]
        except KeyError:
            raise KeyError(f"unknown site label {site!r}") from None

    def replace(self, **changes) -> "WaveguideLattice":
        return dataclasses.replace(self, **changes)


def nearest_neighbour_mask(distances: np.ndarray) -> np.ndarray:
    """Pairs whose separation is the smallest one seen from either site."""
    n = distances.shape[0]
    if n < 2:
        return np.zeros((n, n), dtype=bool)
    off = distances + np.diag(np.full(n, np.inf))
    dmin = off.min(axis=1)
    tol = _NEAREST_RTOL * dmin
    close = np.abs(off - dmin[:, None]) <= tol[:, None]
    return close | close.T


def model_coupling(
    distances: np.ndarray, model: CouplingModel, pin_nearest: bool = False, nearest=None
) -> np.ndarray:
    """Coupling matrix from pairwise separations.

    With ``pin_nearest`` every nearest-neighbour pair gets exactly ``model.c_ref``
    and the distance model only fills in the remaining pairs.
    """
    c = model(distances)
    if pin_nearest:
        if nearest is None:
            nearest = nearest_neighbour_mask(distances)
        c = np.where(nearest, model.c_ref, c)
    np.fill_diagonal(c, 0.0)
    return 0.5 * (c + c.T)


def lattice_from_model(
    sites: Sequence[Waveguide],
    beta,
    model: CouplingModel,
    length: float,
    pin_nearest: bool = False,
) -> WaveguideLattice:
    pos = np.array([[s.x, s.y] for s in sites], dtype=float).reshape(-1, 2)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    return WaveguideLattice(
        sites=tuple(sites),
        beta=beta,
        coupling=model_coupling(dist, model, pin_nearest),
        length=length,
        model=model,
        pin_nearest=pin_nearest,
    )


def build_swiss_cross(
    dx: float = 18.0,
    dy: float = 19.0,
    c1: float = 1.5,
    beta: float | Sequence[float] = 0.0,
    length: float = 1.4,
    model: CouplingModel | None = None,
) -> WaveguideLattice:
    """Nine-waveguide cross: a horizontal X arm and a vertical Y arm sharing ``C``.

    Sites are ordered ``X1, X2, C, X3, X4, Y1, Y2, Y3, Y4``. The X arm lies at
    ``x = -2dx, -dx, 0, dx, 2dx`` and the Y arm at ``y = -2dy, -dy, dy, 2dy``, so
    that swapping ``Xi <-> Yi`` is the mirror through the diagonal.

    Nearest neighbours along both arms couple with exactly ``c1``. All other
    pairs follow ``model`` (default: reference distance ``min(dx, dy)``, 6 um
    decay, 30 um cutoff, which couples the diagonal pairs such as X2-Y2 but not
    next-nearest pairs along an arm).
    """
    for name, value in (("dx", dx), ("dy", dy), ("c1", c1), ("length", length)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")
    if model is None:
        model = CouplingModel(c_ref=c1, d_ref=min(dx, dy))
    elif model.c_ref != c1:
        model = dataclasses.replace(model, c_ref=c1)
    coords = [
        (-2 * dx, 0.0), (-dx, 0.0), (0.0, 0.0), (dx, 0.0), (2 * dx, 0.0),
        (0.0, -2 * dy), (0.0, -dy), (0.0, dy), (0.0, 2 * dy),
    ]
    sites = [Waveguide(lab, x, y) for lab, (x, y) in zip(SWISS_CROSS_LABELS, coords)]
    return lattice_from_model(sites, beta, model, length, pin_nearest=True)


def build_linear_chain(
    n: int,
    spacing: float = 18.0,
    c1: float = 1.5,
    beta: float | Sequence[float] = 0.0,
    length: float = 1.4,
    model: CouplingModel | None = None,
) -> WaveguideLattice:
    """Straight chain of ``n`` waveguides along x.

    Without a ``model`` only nearest neighbours couple. With one, nearest
    neighbours are still pinned to ``c1`` and farther pairs follow the model.
    """
    if n < 1:
        raise ValueError(f"a chain needs at least one site, got n={n}")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    sites = [Waveguide(f"W{i + 1}", i * spacing, 0.0) for i in range(n)]
    if model is None:
        model = CouplingModel(c_ref=c1, d_ref=spacing, cutoff=spacing)
    elif model.c_ref != c1:
        model = dataclasses.replace(model, c_ref=c1)
    return lattice_from_model(sites, beta, model, length, pin_nearest=True)


def hamiltonian(lattice: WaveguideLattice) -> np.ndarray:
    """Single-photon Hamiltonian: propagation constants on the diagonal, couplings off it."""
    h = np.array(lattice.coupling, dtype=float)
    h[np.diag_indices(lattice.n)] = lattice.beta
    return h


def lattice_to_config(lattice: WaveguideLattice) -> dict:
    beta = lattice.beta
    beta_cm = float(beta[0]) if beta.size and np.all(beta == beta[0]) else beta.tolist()
    if lattice.model is not None:
        m = lattice.model
        coupling = {
            "model": {
                "c_ref": m.c_ref,
                "d_ref_um": m.d_ref,
                "decay_um": m.decay_length,
                "cutoff_um": m.cutoff,
                "pin_nearest": lattice.pin_nearest,
            }
        }
    else:
        coupling = {"matrix": lattice.coupling.tolist()}
    return {
        "sites": [{"label": s.label, "x_um": s.x, "y_um": s.y} for s in lattice.sites],
        "beta_cm": beta_cm,
        "coupling": coupling,
        "length_cm": lattice.length,
    }


def lattice_from_config(config: dict) -> WaveguideLattice:
    """Build a lattice from the JSON config schema (see ``lattice_to_config``)."""
    try:
        sites = tuple(
            Waveguide(str(s["label"]), float(s["x_um"]), float(s["y_um"]))
            for s in config["sites"]
        )
        beta = config.get("beta_cm", 0.0)
        length = float(config["length_cm"])
        coupling = config["coupling"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed lattice config: {exc}") from exc
    if "model" in coupling:
        m = coupling["model"]
        model = CouplingModel(
            c_ref=float(m["c_ref"]),
            d_ref=float(m["d_ref_um"]),
            decay_length=float(m.get("decay_um", 6.0)),
            cutoff=float(m.get("cutoff_um", 30.0)),
        )
        return lattice_from_model(
            sites, beta, model, length, pin_nearest=bool(m.get("pin_nearest", False))
        )
    if "matrix" in coupling:
        return WaveguideLattice(sites, beta, np.asarray(coupling["matrix"]), length)
    raise ValueError("coupling must define either 'model' or 'matrix'")
