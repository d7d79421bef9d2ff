"""Two-photon coincidence matrices.

For photons entering sites ``q`` and ``r`` the two paths to the output pair
``(q', r')`` have amplitudes ``A = U[q', q] U[r', r]`` and
``B = U[q', r] U[r', q]``. Matrices are stored dense and symmetric; entry
``(q', r')`` is the probability of one photon in ``q'`` and one in ``r'``, so
the probabilities add up over the upper triangle (diagonal included).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .evolution import as_unitary

__all__ = [
    "CorrelationMatrix",
    "PortEfficiencies",
    "path_amplitudes",
    "partial_correlations",
    "quantum_correlations",
    "distinguishable_correlations",
    "apply_losses",
    "branch_sum",
    "unordered_sum",
]


def unordered_sum(gamma: np.ndarray) -> float:
    return float(np.sum(np.triu(gamma)))


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    gamma: np.ndarray
    input_pair: tuple[int, int]
    indistinguishability: float
    loss_applied: bool = False
    labels: tuple[str, ...] | None = None
    z: float | None = None
    input_labels: tuple[str, str] | None = None

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    def total(self) -> float:
        return unordered_sum(self.gamma)

    def metadata(self) -> dict:
        q, r = self.input_pair
        meta = {
            "input_pair": [int(q), int(r)],
            "indistinguishability": self.indistinguishability,
            "loss_applied": self.loss_applied,
            "z_cm": self.z,
        }
        if self.input_labels is not None:
            meta["input_labels"] = list(self.input_labels)
        return meta


@dataclass(frozen=True, eq=False)
class PortEfficiencies:
    eta_in: np.ndarray
    eta_out: np.ndarray

    def __post_init__(self):
        eta_in = np.asarray(self.eta_in, dtype=float)
        eta_out = np.asarray(self.eta_out, dtype=float)
        for name, eta in (("eta_in", eta_in), ("eta_out", eta_out)):
            if np.any(eta <= 0) or np.any(eta > 1):
                raise ValueError(f"{name} entries must lie in (0, 1]")
        object.__setattr__(self, "eta_in", eta_in)
        object.__setattr__(self, "eta_out", eta_out)

    @classmethod
    def ideal(cls, n: int) -> "PortEfficiencies":
        return cls(np.ones(n), np.ones(n))


def path_amplitudes(u: np.ndarray, q: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.outer(u[:, q], u[:, r])
    return a, a.T


def _check_sites(n: int, q: int, r: int):
    for s in (q, r):
        if not 0 <= s < n:
            raise IndexError(f"input site {s} out of range for {n} sites")


def partial_correlations(p, q: int, r: int, indist: float, labels=None) -> CorrelationMatrix:
    """Coincidences for photons with wavepacket overlap ``indist``.

    Only the interference term ``2 Re(A conj(B))`` is weighted by ``indist``.
    ``indist = 1`` gives the bosonic result, ``indist = 0`` the classical mixture
    of the two paths. Both photons may enter the same site (``q == r``); the
    input state is then normalised by ``1 + indist``.
    """
    if not 0.0 <= indist <= 1.0:
        raise ValueError(f"indistinguishability must lie in [0, 1], got {indist}")
    u = as_unitary(p)
    n = u.shape[0]
    _check_sites(n, q, r)
    a, b = path_amplitudes(u, q, r)
    gamma = np.abs(a) ** 2 + np.abs(b) ** 2 + 2.0 * indist * np.real(a * b.conj())
    gamma[np.diag_indices(n)] *= 0.5
    if q == r:
        gamma /= 1.0 + indist
    # rounding can leave tiny negatives where the paths cancel
    gamma = np.maximum(gamma, 0.0)
    return CorrelationMatrix(
        gamma=gamma,
        input_pair=(int(q), int(r)),
        indistinguishability=float(indist),
        labels=None if labels is None else tuple(labels),
        z=getattr(p, "z", None),
        input_labels=None if labels is None else (labels[q], labels[r]),
    )


def quantum_correlations(p, q: int, r: int, labels=None) -> CorrelationMatrix:
    return partial_correlations(p, q, r, 1.0, labels=labels)


def distinguishable_correlations(p, q: int, r: int, labels=None) -> CorrelationMatrix:
    return partial_correlations(p, q, r, 0.0, labels=labels)


def apply_losses(
    c: CorrelationMatrix, eff: PortEfficiencies, renormalize: bool = False
) -> CorrelationMatrix:
    """Scale coincidences by output (and input) port efficiencies.

    ``gamma[q', r']`` is multiplied by ``eta_out[q'] * eta_out[r']`` and by the
    input factor ``eta_in[q] * eta_in[r]``. With ``renormalize`` the result is
    rescaled to unit total, which removes the input factor altogether.
    """
    if c.loss_applied:
        raise ValueError("losses were already applied to this correlation matrix")
    if eff.eta_out.shape != (c.n,) or eff.eta_in.shape != (c.n,):
        raise ValueError("efficiency vectors must have one entry per site")
    q, r = c.input_pair
    gamma = c.gamma * np.outer(eff.eta_out, eff.eta_out) * (eff.eta_in[q] * eff.eta_in[r])
    if renormalize:
        total = unordered_sum(gamma)
        if total > 0:
            gamma = gamma / total
    return dataclasses.replace(c, gamma=gamma, loss_applied=True)


def branch_sum(c: CorrelationMatrix, branches: Mapping[str, Sequence]) -> CorrelationMatrix:
    """Coarse-grain a correlation matrix onto groups of sites.

    ``branches`` maps a branch name to its site indices (or labels, when the
    matrix carries labels). Entry ``(B1, B2)`` sums ``gamma`` over the
    unordered site pairs with one site in each branch, so the unordered total
    is preserved.
    """
    lookup = {lab: i for i, lab in enumerate(c.labels)} if c.labels else {}
    groups = []
    for name, members in branches.items():
        idx = []
        for m in members:
            if isinstance(m, (int, np.integer)):
                idx.append(int(m))
            elif m in lookup:
                idx.append(lookup[m])
            else:
                raise KeyError(f"unknown site {m!r} in branch {name!r}")
        groups.append(np.array(idx, dtype=int))
    seen = np.concatenate(groups) if groups else np.array([], dtype=int)
    if len(set(seen.tolist())) != seen.size:
        raise ValueError("branches overlap")
    if sorted(seen.tolist()) != list(range(c.n)):
        raise ValueError("branches must cover every site exactly once")

    g = c.gamma
    k = len(groups)
    out = np.zeros((k, k))
    for i, gi in enumerate(groups):
        block = g[np.ix_(gi, gi)]
        out[i, i] = np.sum(np.triu(block))
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = np.sum(g[np.ix_(gi, groups[j])])
    return dataclasses.replace(c, gamma=out, labels=tuple(branches.keys()))
