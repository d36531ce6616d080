"""Joint photon-number distribution of a twin beam under loss and spurious counts.

The probe is a two-mode squeezed vacuum with squeezing parameter ``r``; each
arm passes through an independent pure-loss channel with transmission
amplitude ``eta_i`` (power transmission ``eta_i**2``) and each detector adds
Poissonian spurious counts with mean ``nu_i`` per shot.  The joint count
distribution is evaluated exactly on a finite grid with a certified bound on
the truncated series.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import stats
from scipy.linalg import toeplitz
from scipy.special import gammaln

PARAM_NAMES = ("eta1", "eta2", "r", "nu1", "nu2")

# log n! lookup, grown on demand
_LOG_FACT = gammaln(np.arange(512, dtype=float) + 1.0)


def _log_factorial(n: np.ndarray) -> np.ndarray:
    global _LOG_FACT
    top = int(np.max(n, initial=0))
    if top >= _LOG_FACT.size:
        _LOG_FACT = gammaln(np.arange(2 * top, dtype=float) + 1.0)
    return _LOG_FACT[n]


@dataclasses.dataclass(frozen=True)
class ParamSet:
    """Physical parameters of the twin-beam model.

    Attributes:
        eta1: transmission amplitude of arm a, in (0, 1].
        eta2: transmission amplitude of arm b, in (0, 1].
        r: squeezing parameter, >= 0; mean photons per arm before loss is sinh(r)**2.
        nu1: mean spurious counts per shot on detector a, >= 0.
        nu2: mean spurious counts per shot on detector b, >= 0.
        phi: squeezing phase in radians.  Count statistics do not depend on it.
    """

    eta1: float
    eta2: float
    r: float
    nu1: float = 0.0
    nu2: float = 0.0
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.eta1 <= 1.0) or not (0.0 < self.eta2 <= 1.0):
            raise ValueError(
                f"transmission amplitudes must lie in (0, 1], got "
                f"eta1={self.eta1}, eta2={self.eta2}"
            )
        if self.r < 0.0:
            raise ValueError(f"squeezing parameter must be >= 0, got r={self.r}")
        if self.nu1 < 0.0 or self.nu2 < 0.0:
            raise ValueError(
                f"spurious-count rates must be >= 0, got nu1={self.nu1}, nu2={self.nu2}"
            )

    def replace(self, **changes) -> "ParamSet":
        return dataclasses.replace(self, **changes)

    def values(self, names: tuple[str, ...] = PARAM_NAMES) -> np.ndarray:
        return np.array([getattr(self, name) for name in names], dtype=float)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES + ("phi",)}

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSet":
        return cls(**{k: float(data[k]) for k in PARAM_NAMES + ("phi",) if k in data})


@dataclasses.dataclass(frozen=True)
class JointPND:
    """Joint count distribution on a finite grid plus the aggregated tail mass.

    ``probs[m, n]`` is the probability of counting m photons on detector a and
    n on detector b; ``tail_mass`` is the probability of any outcome beyond
    the grid.
    """

    probs: np.ndarray
    tail_mass: float

    def __post_init__(self) -> None:
        if self.probs.ndim != 2:
            raise ValueError("probability grid must be two dimensional")
        if float(np.min(self.probs)) < -1e-12 or float(np.max(self.probs)) > 1.0 + 1e-12:
            raise ValueError("probabilities out of [0, 1]")
        if not -1e-12 <= self.tail_mass <= 1.0 + 1e-12:
            raise ValueError(f"tail mass out of range: {self.tail_mass}")

    @property
    def cutoff_a(self) -> int:
        return self.probs.shape[0] - 1

    @property
    def cutoff_b(self) -> int:
        return self.probs.shape[1] - 1

    def marginal_means(self) -> tuple[float, float]:
        """Mean count per detector, ignoring the tail mass."""
        m = np.arange(self.probs.shape[0])
        n = np.arange(self.probs.shape[1])
        return (
            float(m @ self.probs.sum(axis=1)),
            float(n @ self.probs.sum(axis=0)),
        )


def _normalize_cutoff(cutoff) -> tuple[int, int]:
    if np.isscalar(cutoff):
        pair = (int(cutoff), int(cutoff))
    else:
        ca, cb = cutoff
        pair = (int(ca), int(cb))
    if pair[0] < 0 or pair[1] < 0:
        raise ValueError(f"cutoffs must be >= 0, got {pair}")
    return pair


def lossy_tmsv_pnd(eta1: float, eta2: float, r: float, cutoff, tol: float = 1e-14) -> JointPND:
    """Exact joint count distribution of a twin beam after per-arm loss.

    Evaluates, in log space,

        p(k, l) = (1 / cosh^2 r) * sum_{N >= max(k, l)}
                  lam1^(N-k) * lam2^(N-l) * |f|^(2N) * C(N, k) * C(N, l)

    with lam_i = (1 - eta_i^2) / eta_i^2 and |f|^2 = eta1^2 eta2^2 tanh^2 r.
    Successive term ratios decrease toward rho = (1 - eta1^2)(1 - eta2^2)
    tanh^2 r < 1, so each bin's remainder is bounded by a geometric series
    evaluated at the current ratio; summation stops once that bound drops
    below ``tol`` times the partial sum.

    Args:
        eta1: transmission amplitude of arm a, in (0, 1].
        eta2: transmission amplitude of arm b, in (0, 1].
        r: squeezing parameter, >= 0.
        cutoff: max photon index per arm, an int or an (int, int) pair.
        tol: relative truncation tolerance per bin.

    Returns:
        JointPND on a (cutoff_a + 1) x (cutoff_b + 1) grid.
    """
    if not (0.0 < eta1 <= 1.0) or not (0.0 < eta2 <= 1.0):
        raise ValueError(
            f"transmission amplitudes must lie in (0, 1], got eta1={eta1}, eta2={eta2}"
        )
    if r < 0.0:
        raise ValueError(f"squeezing parameter must be >= 0, got r={r}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    ca, cb = _normalize_cutoff(cutoff)

    probs = np.zeros((ca + 1, cb + 1))
    if r == 0.0:
        probs[0, 0] = 1.0
        return JointPND(probs=probs, tail_mass=0.0)

    ks = np.arange(ca + 1)[:, None]
    ls = np.arange(cb + 1)[None, :]
    start = np.maximum(ks, ls)

    lam1 = (1.0 - eta1**2) / eta1**2
    lam2 = (1.0 - eta2**2) / eta2**2
    log_lam1 = np.log(lam1) if lam1 > 0.0 else -np.inf
    log_lam2 = np.log(lam2) if lam2 > 0.0 else -np.inf
    log_f2 = 2.0 * (np.log(eta1) + np.log(eta2) + np.log(np.tanh(r)))
    log_norm = 2.0 * np.log(np.cosh(r))
    rho = lam1 * lam2 * np.exp(log_f2)

    log_fact_k = _log_factorial(ks)
    log_fact_l = _log_factorial(ls)

    block = 16
    n_lo = 0
    converged = np.zeros_like(start, dtype=bool)
    while not converged.all():
        if n_lo > 100_000:
            raise RuntimeError("photon-number series failed to converge")
        ns = np.arange(n_lo, n_lo + block)[:, None, None]
        nk = ns - ks[None, :, :]
        nl = ns - ls[None, :, :]
        valid = (nk >= 0) & (nl >= 0)
        nk_c = np.where(valid, nk, 0)
        nl_c = np.where(valid, nl, 0)
        # (N - k) * log(lam) with the 0 * (-inf) case pinned to 0 for eta = 1
        with np.errstate(invalid="ignore"):
            w1 = np.where(nk_c == 0, 0.0, nk_c * log_lam1)
            w2 = np.where(nl_c == 0, 0.0, nl_c * log_lam2)
        exponent = (
            2.0 * _log_factorial(ns)
            - _log_factorial(nk_c)
            - _log_factorial(nl_c)
            - log_fact_k[None, :, :]
            - log_fact_l[None, :, :]
            + w1
            + w2
            + ns * log_f2
            - log_norm
        )
        terms = np.where(valid, np.exp(np.where(valid, exponent, -np.inf)), 0.0)
        probs += terms.sum(axis=0)

        n_last = n_lo + block - 1
        active = n_last >= start
        denom = (n_last + 1 - ks) * (n_last + 1 - ls)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(active, rho * (n_last + 1) ** 2 / denom, np.inf)
            bound = np.where(
                (ratio < 1.0) & active, terms[-1] * ratio / (1.0 - ratio), np.inf
            )
        converged = active & (bound <= tol * probs)
        n_lo += block

    tail = max(1.0 - float(probs.sum()), 0.0)
    return JointPND(probs=probs, tail_mass=tail)


def _poisson_mixing_matrix(cutoff: int, nu: float) -> np.ndarray:
    """Lower-triangular convolution matrix A[m, k] = Poisson(nu).pmf(m - k)."""
    pmf = stats.poisson.pmf(np.arange(cutoff + 1), nu)
    return toeplitz(pmf, np.zeros(cutoff + 1))


def apply_dark_counts(pnd: JointPND, nu1: float, nu2: float) -> JointPND:
    """Convolve a count distribution with independent Poissonian spurious counts.

    The output grid matches the input grid; Poisson mass pushed past the
    cutoff moves into the tail.
    """
    if nu1 < 0.0 or nu2 < 0.0:
        raise ValueError(f"spurious-count rates must be >= 0, got nu1={nu1}, nu2={nu2}")
    if nu1 == 0.0 and nu2 == 0.0:
        return pnd
    a1 = _poisson_mixing_matrix(pnd.cutoff_a, nu1)
    a2 = _poisson_mixing_matrix(pnd.cutoff_b, nu2)
    probs = a1 @ pnd.probs @ a2.T
    tail = max(1.0 - float(probs.sum()), 0.0)
    return JointPND(probs=probs, tail_mass=tail)


def default_cutoff(theta: ParamSet, tail_bound: float = 1e-12) -> tuple[int, int]:
    """Per-arm cutoffs keeping the combined thermal plus Poisson tail below ``tail_bound``.

    Each arm's pre-dark-count marginal is thermal with mean eta^2 sinh(r)^2,
    so its tail decays geometrically; the Poisson part is bounded through its
    survival function.  The two are combined with a union bound per arm.
    """
    cutoffs = []
    for eta, nu in ((theta.eta1, theta.nu1), (theta.eta2, theta.nu2)):
        nbar = eta**2 * np.sinh(theta.r) ** 2
        c_th = 1
        if nbar > 0.0:
            c_th = int(np.ceil(np.log(tail_bound / 4.0) / np.log(nbar / (1.0 + nbar)))) + 1
        c_poi = 0
        if nu > 0.0:
            c_poi = int(stats.poisson.isf(tail_bound / 4.0, nu))
        cutoffs.append(max(c_th + c_poi + 2, 2))
    return (cutoffs[0], cutoffs[1])


def model_pnd(theta: ParamSet, cutoff=None, tol: float = 1e-14) -> JointPND:
    """Full count model: lossy twin beam followed by spurious-count convolution.

    Args:
        theta: model parameters.
        cutoff: grid cutoff per arm; defaults to ``default_cutoff(theta)``.
        tol: relative series truncation tolerance per bin.
    """
    if cutoff is None:
        cutoff = default_cutoff(theta)
    pnd = lossy_tmsv_pnd(theta.eta1, theta.eta2, theta.r, cutoff, tol)
    return apply_dark_counts(pnd, theta.nu1, theta.nu2)


def lowloss_three_outcome(eta1: float, eta2: float, r: float) -> tuple[float, float, float]:
    """Leading mixture weights in the low-loss regime.

    Returns the probabilities of losing no photon, one photon from arm a, and
    one photon from arm b.  These three weights carry all parameter
    information to first order in (1 - eta_i).
    """
    if not (0.0 < eta1 <= 1.0) or not (0.0 < eta2 <= 1.0):
        raise ValueError(
            f"transmission amplitudes must lie in (0, 1], got eta1={eta1}, eta2={eta2}"
        )
    if r <= 0.0:
        raise ValueError(f"squeezing parameter must be > 0, got r={r}")
    lam1 = (1.0 - eta1**2) / eta1**2
    lam2 = (1.0 - eta2**2) / eta2**2
    f2 = (eta1 * eta2 * np.tanh(r)) ** 2
    c2 = np.cosh(r) ** 2
    p00 = 1.0 / (c2 * (1.0 - f2))
    p10 = lam1 * f2 / (c2 * (1.0 - f2) ** 2)
    p01 = lam2 * f2 / (c2 * (1.0 - f2) ** 2)
    return (float(p00), float(p10), float(p01))
