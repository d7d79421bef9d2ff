"""Unitary propagation ``U(z) = exp(-i H z)`` through a Hermitian eigendecomposition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "HERMITIAN_ATOL",
    "Spectrum",
    "Propagator",
    "spectrum",
    "propagator",
    "propagators",
    "single_photon_distribution",
    "as_unitary",
]

HERMITIAN_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def evolve(self, z: float) -> "Propagator":
        n = self.eigenvalues.size
        if z == 0:
            u = np.eye(n, dtype=complex)
        else:
            q = self.eigenvectors
            u = (q * np.exp(-1j * self.eigenvalues * z)) @ q.conj().T
        return Propagator(u=u, z=float(z), eigenvalues=self.eigenvalues, eigenvectors=self.eigenvectors)


@dataclass(frozen=True, eq=False)
class Propagator:
    """Propagator after length ``z``; column ``q`` holds the output amplitudes for input ``q``."""

    u: np.ndarray
    z: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]


def spectrum(h) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix.

    Raises
    ------
    ValueError
        If ``h`` is not square or deviates from Hermitian by more than ``HERMITIAN_ATOL``.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be a square matrix, got shape {h.shape}")
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > HERMITIAN_ATOL:
        raise ValueError(f"Hamiltonian is not Hermitian (max asymmetry {asym:.3g})")
    w, q = np.linalg.eigh(h)
    return Spectrum(eigenvalues=w, eigenvectors=q)


def propagator(h, z: float) -> Propagator:
    if z < 0:
        raise ValueError(f"propagation length must be non-negative, got {z}")
    return spectrum(h).evolve(z)


def propagators(h, zs: Iterable[float]) -> list[Propagator]:
    """Propagators for several lengths sharing one eigendecomposition."""
    spec = spectrum(h)
    out = []
    for z in zs:
        if z < 0:
            raise ValueError(f"propagation length must be non-negative, got {z}")
        out.append(spec.evolve(z))
    return out


def as_unitary(p) -> np.ndarray:
    """Accept a ``Propagator`` or a bare square matrix."""
    u = p.u if isinstance(p, Propagator) else np.asarray(p)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    return u


def single_photon_distribution(p, input: int) -> np.ndarray:
    u = as_unitary(p)
    if not 0 <= input < u.shape[0]:
        raise IndexError(f"input site {input} out of range for {u.shape[0]} sites")
    return np.abs(u[:, input]) ** 2
