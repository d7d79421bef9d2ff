"""Two-photon walks as single-particle walks on the graph of unordered site pairs.

Vertex ``{q, r}`` stands for the normalised Fock state ``a+_q a+_r |0>`` when
``q != r`` and ``(a+_q)^2 / sqrt(2) |0>`` when ``q == r``. Projecting the
lattice Hamiltonian onto these states gives

* potential ``beta_q + beta_r`` on every vertex (``2 beta_q`` when doubly occupied),
* hopping ``sqrt(2) C_qr`` between ``{q, q}`` and ``{q, r}``,
* hopping ``C_rs`` between ``{q, r}`` and ``{q, s}`` for distinct ``q, r, s``,

and nothing else.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .evolution import propagator
from .lattice import WaveguideLattice, hamiltonian

__all__ = ["ConfigGraph", "expand", "expand_hamiltonian", "simulate_on_graph"]


@dataclass(frozen=True, eq=False)
class ConfigGraph:
    pairs: tuple[tuple[int, int], ...]
    adjacency: np.ndarray
    site_labels: tuple[str, ...]

    @property
    def m(self) -> int:
        return len(self.pairs)

    @property
    def potential(self) -> np.ndarray:
        return np.real(np.diag(self.adjacency)).copy()

    @property
    def vertex_labels(self) -> list[str]:
        return [f"{self.site_labels[q]}-{self.site_labels[r]}" for q, r in self.pairs]

    def index(self, q: int, r: int) -> int:
        key = (min(q, r), max(q, r))
        try:
            return self.pairs.index(key)
        except ValueError:
            raise KeyError(f"no vertex {key}") from None

    def is_doubly_occupied(self) -> np.ndarray:
        return np.array([q == r for q, r in self.pairs])

    def edges(self) -> list[tuple[int, int, complex]]:
        a, b = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i), int(j), self.adjacency[i, j]) for i, j in zip(a, b)]

    def degree(self) -> np.ndarray:
        off = self.adjacency - np.diag(np.diag(self.adjacency))
        return np.count_nonzero(off, axis=1)


def expand_hamiltonian(h, site_labels=None) -> ConfigGraph:
    """Two-photon Hamiltonian on unordered pairs for a single-photon Hamiltonian ``h``.

    ``h`` may be complex Hermitian; the hop from ``{q, r}`` to ``{q, s}`` then
    carries ``h[s, r]``.
    """
    h = np.asarray(h)
    n = h.shape[0]
    if site_labels is None:
        site_labels = [str(i) for i in range(n)]
    pairs = tuple(itertools.combinations_with_replacement(range(n), 2))
    index = {p: i for i, p in enumerate(pairs)}
    dtype = complex if np.iscomplexobj(h) else float
    adj = np.zeros((len(pairs), len(pairs)), dtype=dtype)

    for col, (q, r) in enumerate(pairs):
        adj[col, col] = h[q, q] + h[r, r]
        n_moving = 2 if q == r else 1
        # a+_s a_m on normalised Fock states: sqrt(n_m) * sqrt(n_s + 1)
        movers = [(r, q)] if q == r else [(r, q), (q, r)]
        for moving, staying in movers:
            for s in range(n):
                if s == moving or h[s, moving] == 0:
                    continue
                n_target = 1 if s == staying else 0
                row = index[(min(s, staying), max(s, staying))]
                adj[row, col] += h[s, moving] * np.sqrt(n_moving * (n_target + 1))
    return ConfigGraph(pairs=pairs, adjacency=adj, site_labels=tuple(site_labels))


def expand(lattice: WaveguideLattice) -> ConfigGraph:
    return expand_hamiltonian(hamiltonian(lattice), lattice.labels)


def simulate_on_graph(g: ConfigGraph, start, z: float) -> np.ndarray:
    """Vertex probabilities after a single-particle walk of length ``z`` from ``start``.

    ``start`` is a vertex index or a site pair ``(q, r)``.
    """
    if isinstance(start, (tuple, list)):
        start = g.index(*start)
    if not 0 <= start < g.m:
        raise IndexError(f"vertex {start} out of range for {g.m} vertices")
    u = propagator(g.adjacency, z).u
    return np.abs(u[:, start]) ** 2
