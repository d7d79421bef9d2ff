"""Classical-light bound on coincidence matrices and its significance under shot noise.

For classical light every pair of outputs obeys

    V[q, r] = 2/3 * sqrt(G[q, q] * G[r, r]) - G[q, r] <= 0,

so a positive ``V`` certifies nonclassical interference. Significance is
reported in units of the standard deviation implied by Poissonian counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlations import CorrelationMatrix

__all__ = [
    "RNG_ALGORITHM",
    "CountMatrix",
    "ViolationReport",
    "bound_violation",
    "violation_matrix",
    "sample_counts",
    "violation_significance",
]

RNG_ALGORITHM = "numpy.random.PCG64"

# resamples drawn per RNG substream; fixed so results do not depend on chunking
_BOOTSTRAP_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Symmetric matrix of coincidence counts over unordered output pairs."""

    counts: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"counts must be a square matrix, got shape {counts.shape}")
        if not np.array_equal(counts, counts.T):
            raise ValueError("count matrix must be symmetric")
        if np.any(counts < 0) or not np.all(np.mod(counts, 1) == 0):
            raise ValueError("counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(np.sum(np.triu(self.counts)))

    @property
    def n(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True, eq=False)
class ViolationReport:
    v: np.ndarray
    sigma: np.ndarray | None = None
    sigmas_violated: np.ndarray | None = None
    labels: tuple[str, ...] | None = None
    metadata: dict = field(default_factory=dict)

    def significant(self, threshold: float = 3.0) -> list[tuple[int, int]]:
        """Upper-triangle pairs violating the bound by at least ``threshold`` sigma."""
        if self.sigmas_violated is None:
            raise ValueError("report has no standard deviations")
        iu = np.triu_indices(self.v.shape[0], k=1)
        hit = self.sigmas_violated[iu] >= threshold
        return [(int(a), int(b)) for a, b in zip(iu[0][hit], iu[1][hit])]


def bound_violation(gamma: np.ndarray) -> np.ndarray:
    """``V`` for every pair of a (stack of) symmetric matrices; the diagonal is zero."""
    gamma = np.asarray(gamma, dtype=float)
    d = np.diagonal(gamma, axis1=-2, axis2=-1)
    v = (2.0 / 3.0) * np.sqrt(d[..., :, None] * d[..., None, :]) - gamma
    n = gamma.shape[-1]
    v[..., np.arange(n), np.arange(n)] = 0.0
    return v


def violation_matrix(c: CorrelationMatrix | np.ndarray) -> ViolationReport:
    if isinstance(c, CorrelationMatrix):
        return ViolationReport(v=bound_violation(c.gamma), labels=c.labels)
    return ViolationReport(v=bound_violation(c))


def sample_counts(c: CorrelationMatrix, total_expected: float, seed: int) -> CountMatrix:
    """Independent Poisson counts with mean ``total_expected * gamma`` per unordered pair."""
    if not total_expected > 0:
        raise ValueError(f"count budget must be positive, got {total_expected}")
    gamma = c.gamma if isinstance(c, CorrelationMatrix) else np.asarray(c)
    n = gamma.shape[0]
    iu = np.triu_indices(n)
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.poisson(total_expected * gamma[iu])
    counts = np.zeros((n, n), dtype=np.int64)
    counts[iu] = draws
    counts = counts + np.triu(counts, k=1).T
    labels = c.labels if isinstance(c, CorrelationMatrix) else None
    return CountMatrix(counts, labels=labels)


def _from_upper(vals: np.ndarray, n: int) -> np.ndarray:
    """Rebuild symmetric matrices from upper-triangle vectors (last axis)."""
    iu = np.triu_indices(n)
    out = np.zeros(vals.shape[:-1] + (n, n))
    out[..., iu[0], iu[1]] = vals
    out[..., iu[1], iu[0]] = vals
    return out


def _bootstrap_sigma(upper: np.ndarray, n: int, resamples: int, seed: int) -> np.ndarray:
    values = []
    nchunks = -(-resamples // _BOOTSTRAP_CHUNK)
    for chunk in range(nchunks):
        size = min(_BOOTSTRAP_CHUNK, resamples - chunk * _BOOTSTRAP_CHUNK)
        rng = np.random.Generator(np.random.PCG64([seed, chunk]))
        draws = rng.poisson(upper, size=(size, upper.size)).astype(float)
        totals = draws.sum(axis=1)
        draws = draws[totals > 0] / totals[totals > 0, None]
        values.append(bound_violation(_from_upper(draws, n)))
    v = np.concatenate(values, axis=0)
    if v.shape[0] < 2:
        return np.full((n, n), np.inf)
    return v.std(axis=0, ddof=1)


def _propagated_sigma(upper: np.ndarray, n: int) -> np.ndarray:
    # first-order propagation with var(count) = count; V is homogeneous of degree
    # one in the normalised rates, so dV/dn_j = (dV/dg_j - V) / T
    total = upper.sum()
    g = _from_upper(upper / total, n)
    d = np.diag(g)
    v = bound_violation(g)
    iu = np.triu_indices(n)
    pair_index = np.zeros((n, n), dtype=int)
    pair_index[iu] = np.arange(iu[0].size)
    pair_index[iu[1], iu[0]] = np.arange(iu[0].size)
    sigma = np.zeros((n, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        for q in range(n):
            for r in range(q + 1, n):
                grad = np.full(upper.size, -v[q, r])
                grad[pair_index[q, r]] += -1.0
                grad[pair_index[q, q]] += np.sqrt(d[r] / d[q]) / 3.0
                grad[pair_index[r, r]] += np.sqrt(d[q] / d[r]) / 3.0
                grad /= total
                s = np.sqrt(np.sum(np.where(upper > 0, grad**2 * upper, 0.0)))
                if not np.isfinite(s):
                    s = np.inf
                sigma[q, r] = sigma[r, q] = s
    return sigma


def violation_significance(
    counts: CountMatrix,
    resamples: int = 10_000,
    seed: int = 0,
    method: str = "bootstrap",
) -> ViolationReport:
    """Point estimate of ``V`` from normalised counts plus its standard deviation.

    Parameters
    ----------
    counts : CountMatrix
        Observed coincidences.
    resamples : int
        Parametric bootstrap size; each resample redraws every count as
        ``Poisson(observed)``.
    seed : int
        Master seed. Resample chunk ``k`` uses the stream ``PCG64([seed, k])``.
    method : {"bootstrap", "propagation"}
        ``"propagation"`` uses first-order error propagation instead, which
        breaks down near empty diagonal entries.

    Returns
    -------
    ViolationReport
        ``sigmas_violated`` is ``v / sigma`` where ``v > 0`` and zero elsewhere.
    """
    total = counts.total
    if total <= 0:
        raise ValueError("count matrix is empty")
    n = counts.n
    iu = np.triu_indices(n)
    upper = counts.counts[iu].astype(float)
    v = bound_violation(_from_upper(upper / total, n))
    if method == "bootstrap":
        if resamples < 100:
            raise ValueError(f"need at least 100 resamples, got {resamples}")
        sigma = _bootstrap_sigma(upper, n, resamples, seed)
    elif method == "propagation":
        sigma = _propagated_sigma(upper, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    np.fill_diagonal(sigma, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((v > 0) & (sigma > 0), v / sigma, 0.0)
    ratio = np.where(np.isfinite(ratio), ratio, 0.0)
    meta = {
        "method": method,
        "seed": int(seed),
        "resamples": int(resamples) if method == "bootstrap" else None,
        "rng": RNG_ALGORITHM,
        "total_counts": total,
    }
    return ViolationReport(v=v, sigma=sigma, sigmas_violated=ratio, labels=counts.labels, metadata=meta)
