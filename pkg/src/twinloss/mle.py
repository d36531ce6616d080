"""Maximum-likelihood fitting of twin-beam count histograms.

The objective is the Kullback-Leibler divergence from the empirical
frequencies to the model distribution conditioned on the occupied bins, so
differences of the objective equal per-shot log-likelihood differences and
the minimum is exactly zero when the model reproduces the data.  Parameters
are optimized through unconstrained transforms with multi-start Nelder-Mead.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .fisher import NumericError, _safe_inverse, observed_fim
from .pnd import PARAM_NAMES, ParamSet, model_pnd


@dataclasses.dataclass(frozen=True)
class Histogram:
    """Joint photon-count histogram on a rectangular grid.

    ``counts[m, n]`` holds the number of shots with m clicks in arm 1 and n
    in arm 2; shots beyond the grid are pooled in ``overflow``.
    """

    counts: np.ndarray
    overflow: int = 0

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.size == 0:
            raise ValueError("counts must be a nonempty two-dimensional grid")
        if not np.all(counts == np.floor(counts)):
            raise ValueError("counts must be integers")
        counts = counts.astype(np.int64)
        if counts.min() < 0:
            raise ValueError("counts must be >= 0")
        if self.overflow < 0:
            raise ValueError("overflow must be >= 0")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "overflow", int(self.overflow))

    @property
    def total(self) -> int:
        """Shots recorded on the grid."""
        return int(self.counts.sum())

    @property
    def shots(self) -> int:
        """All shots, including overflow."""
        return self.total + self.overflow

    @property
    def cutoff(self) -> tuple[int, int]:
        return (self.counts.shape[0] - 1, self.counts.shape[1] - 1)

    @classmethod
    def from_shots(cls, shots, cutoff=None) -> "Histogram":
        """Bin an (n, 2) array of (m, n) click pairs.

        Without a cutoff the grid spans the observed maxima, so nothing
        overflows; with one, pairs beyond it are pooled in ``overflow``.
        """
        pairs = np.asarray(shots)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] == 0:
            raise ValueError("shots must be a nonempty (n, 2) array of click pairs")
        if not np.all(pairs == np.floor(pairs)) or pairs.min() < 0:
            raise ValueError("click counts must be integers >= 0")
        pairs = pairs.astype(np.int64)
        if cutoff is None:
            ca, cb = int(pairs[:, 0].max()), int(pairs[:, 1].max())
        elif np.isscalar(cutoff):
            ca = cb = int(cutoff)
        else:
            ca, cb = (int(c) for c in cutoff)
        inside = (pairs[:, 0] <= ca) & (pairs[:, 1] <= cb)
        kept = pairs[inside]
        flat = np.bincount(
            kept[:, 0] * (cb + 1) + kept[:, 1], minlength=(ca + 1) * (cb + 1)
        )
        return cls(
            counts=flat.reshape(ca + 1, cb + 1),
            overflow=int((~inside).sum()),
        )


@dataclasses.dataclass(frozen=True)
class MleResult:
    """Outcome of a maximum-likelihood fit."""

    theta_hat: ParamSet
    objective: float
    iterations: int
    converged: bool
    covariance: np.ndarray | None
    rms_error: float
    free: tuple[str, ...]
    condition_number: float | None


def _kl_divergence(q: np.ndarray, p: np.ndarray) -> float:
    """KL divergence in nats between aligned probability vectors."""
    support = q > 0
    return float(np.sum(q[support] * (np.log(q[support]) - np.log(p[support]))))


def kl_objective(hist: Histogram, theta: ParamSet, tol: float = 1e-14) -> float:
    """Per-shot fit objective: KL from data frequencies to the model, in nats.

    The model grid matches the data grid, and the model probabilities are
    conditioned on the occupied bins, so the objective is zero exactly when
    the model reproduces the empirical frequencies.  Occupied bins the model
    assigns no probability give +inf.  Overflow shots are ignored.
    """
    counts = hist.counts
    total = hist.total
    if total <= 0:
        raise ValueError("histogram holds no grid counts")
    probs = model_pnd(theta, hist.cutoff, tol).probs
    occupied = counts > 0
    p_occ = probs[occupied]
    if not np.isfinite(p_occ).all() or p_occ.min() <= 0.0:
        return np.inf
    q_occ = counts[occupied] / total
    p_cond = p_occ / p_occ.sum()
    # true KL is >= 0; roundoff near a perfect fit must not break that
    return max(_kl_divergence(q_occ, p_cond), 0.0)


def moment_init(hist: Histogram) -> ParamSet:
    """Heuristic starting point from the marginal count means.

    Assumes a small dark-count rate (0.02) per arm, sizes r from the total
    mean as if both transmission amplitudes were 0.5, then reads each
    amplitude off the ratio of its marginal mean to sinh(r)^2.
    """
    counts = hist.counts
    total = hist.total
    if total <= 0:
        raise ValueError("histogram holds no grid counts")
    m_axis = np.arange(counts.shape[0])
    n_axis = np.arange(counts.shape[1])
    mean1 = float(counts.sum(axis=1) @ m_axis) / total
    mean2 = float(counts.sum(axis=0) @ n_axis) / total
    nu = 0.02
    sinh_sq = max(2.0 * (mean1 + mean2 - 2.0 * nu), 1e-3)
    etas = np.sqrt(
        np.clip(
            (np.array([mean1, mean2]) - nu) / sinh_sq, 2.5e-3, 0.9975
        )
    )
    return ParamSet(
        eta1=float(etas[0]),
        eta2=float(etas[1]),
        r=float(np.arcsinh(np.sqrt(sinh_sq))),
        nu1=nu,
        nu2=nu,
    )


def _softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def _softplus_inverse(y: float) -> float:
    # log(expm1(y)), stable for small and large y
    return float(y + np.log(-np.expm1(-y)))


def _to_unconstrained(theta: ParamSet, free: tuple[str, ...], parametrization: str):
    x = []
    for name in free:
        value = getattr(theta, name)
        if name in ("eta1", "eta2"):
            value = min(max(value, 1e-6), 1.0 - 1e-9)
            x.append(float(logit(value**2 if parametrization == "q" else value)))
        elif name == "r":
            x.append(_softplus_inverse(max(value, 1e-6)))
        else:
            x.append(float(np.log(max(value, 1e-9))))
    return np.array(x)


def _from_unconstrained(
    x: np.ndarray, base: ParamSet, free: tuple[str, ...], parametrization: str
) -> ParamSet:
    updates = {}
    for name, value in zip(free, x):
        if name in ("eta1", "eta2"):
            w = float(expit(value))
            updates[name] = float(np.sqrt(w)) if parametrization == "q" else w
        elif name == "r":
            updates[name] = _softplus(value)
        else:
            updates[name] = float(np.exp(value))
    return base.replace(**updates)


def covariance_estimate(
    hist: Histogram,
    theta_hat: ParamSet,
    params: tuple[str, ...] = PARAM_NAMES,
    step: float = 1e-5,
    tol: float = 1e-14,
):
    """Observed-information covariance at the fit point.

    Returns (covariance, condition_number) over ``params``, where covariance
    is the inverse of the observed information matrix.  Raises NumericError
    when the information matrix is singular.
    """
    fim = observed_fim(hist, theta_hat, params=params, step=step, tol=tol)
    covariance = _safe_inverse(fim.entries)
    return covariance, float(np.linalg.cond(fim.entries))


def fit(
    hist: Histogram,
    init: ParamSet | None = None,
    *,
    free: tuple[str, ...] = PARAM_NAMES,
    n_starts: int = 4,
    seed: int = 0,
    jitter: float = 0.05,
    parametrization: str = "eta",
    tol: float = 1e-14,
    xatol: float = 1e-9,
    fatol: float = 1e-12,
    maxiter: int = 5000,
) -> MleResult:
    """Fit the count model to a histogram by multi-start Nelder-Mead.

    Free parameters are optimized through unconstrained transforms (logistic
    for transmissions, softplus for squeezing, log for dark counts); the
    remaining parameters stay at their ``init`` values.  Start 0 uses
    ``init`` (or ``moment_init``) exactly; further starts jitter the
    unconstrained vector with Gaussian noise seeded by ``seed``.

    Args:
        hist: data histogram; its grid sets the model cutoff.
        init: full starting parameter set, also the source of fixed values.
        free: parameter names to optimize, in any order.
        n_starts: optimizer restarts, >= 1.
        seed: jitter seed (counting-based generator, reproducible).
        jitter: standard deviation of the start jitter.
        parametrization: "eta" fits the amplitudes, "q" their squares.
        tol: model series tolerance.
        xatol, fatol, maxiter: Nelder-Mead termination controls.
    """
    for name in free:
        if name not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {name!r}; choose from {PARAM_NAMES}")
    free_t = tuple(name for name in PARAM_NAMES if name in set(free))
    if not free_t:
        raise ValueError("at least one parameter must be free")
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if parametrization not in ("eta", "q"):
        raise ValueError(f"parametrization must be 'eta' or 'q', got {parametrization!r}")

    base = init if init is not None else moment_init(hist)
    x0 = _to_unconstrained(base, free_t, parametrization)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))

    def objective(x: np.ndarray) -> float:
        return kl_objective(
            hist, _from_unconstrained(x, base, free_t, parametrization), tol
        )

    best = None
    for start in range(n_starts):
        x_start = x0 if start == 0 else x0 + rng.normal(0.0, jitter, size=x0.size)
        result = minimize(
            objective,
            x_start,
            method="Nelder-Mead",
            options={
                "xatol": xatol,
                "fatol": fatol,
                "adaptive": True,
                "maxiter": maxiter,
                "maxfev": 8000,
            },
        )
        if best is None or result.fun < best.fun:
            best = result

    theta_hat = _from_unconstrained(best.x, base, free_t, parametrization)
    try:
        covariance, condition = covariance_estimate(
            hist, theta_hat, params=free_t, tol=tol
        )
    except (NumericError, np.linalg.LinAlgError) as exc:
        warnings.warn(f"covariance unavailable: {exc}", UserWarning, stacklevel=2)
        covariance, condition = None, None

    probs = model_pnd(theta_hat, hist.cutoff, tol).probs
    residual = hist.counts / hist.total - probs
    return MleResult(
        theta_hat=theta_hat,
        objective=float(best.fun),
        iterations=int(best.nit),
        converged=bool(best.success) and np.isfinite(best.fun),
        covariance=covariance,
        rms_error=float(np.sqrt(np.mean(residual**2))),
        free=free_t,
        condition_number=condition,
    )
