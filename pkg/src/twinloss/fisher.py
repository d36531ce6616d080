"""Classical, observed, and quantum Fisher information for twin-beam counting.

Classical information matrices are built from central finite differences of
the exact count model; benchmark quantum Fisher matrices cover coherent
probes, Fock probes, and the low-loss twin-beam approximation.  Sensitivity
is the reciprocal of the total (eta1, eta2) variance, and crossover curves
locate where the twin beam and an equal-energy coherent probe break even.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .gaussian import qfim_inverse_analytic, three_param_qfim
from .pnd import PARAM_NAMES, ParamSet, default_cutoff, model_pnd

ETA_LABELS = ("eta1", "eta2")


class NumericError(RuntimeError):
    """A computation failed for numerical reasons (singular matrix, boundary point)."""


class LowLossValidityWarning(UserWarning):
    """The low-loss approximation was evaluated far from its validity regime."""


@dataclasses.dataclass(frozen=True)
class FisherMatrix:
    """Symmetric information matrix with ordered parameter labels."""

    labels: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.labels)
        if self.entries.shape != (n, n):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match {n} labels"
            )
        scale = max(1.0, float(np.abs(self.entries).max()))
        if float(np.abs(self.entries - self.entries.T).max()) > 1e-12 * scale:
            raise ValueError("information matrix is not symmetric")
        if float(np.linalg.eigvalsh(self.entries).min()) < -1e-10 * scale:
            raise ValueError("information matrix is not positive semidefinite")

    def smallest_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no parameter {label!r} in {self.labels}") from None


def _safe_inverse(matrix: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Inverse of a symmetric matrix, raising with the null direction if singular."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    largest = float(np.abs(eigvals).max())
    if largest == 0.0 or float(np.abs(eigvals).min()) <= rcond * largest:
        direction = eigvecs[:, int(np.abs(eigvals).argmin())]
        raise NumericError(
            f"matrix is singular along direction {np.round(direction, 6).tolist()}"
        )
    return eigvecs @ np.diag(1.0 / eigvals) @ eigvecs.T


def _difference_step(theta: ParamSet, name: str, step: float) -> float:
    """Central-difference step for one parameter, shrunk to stay in the domain."""
    value = getattr(theta, name)
    h = step * max(abs(value), 0.1)
    if name in ETA_LABELS:
        if value >= 1.0:
            h = (1.0 - value) / 2.0
        elif value + h > 1.0:
            h = (1.0 - value) / 2.0
        if value - h <= 0.0:
            h = min(h, value / 2.0)
    else:
        if value - h < 0.0:
            h = value / 2.0
    if h <= 0.0:
        raise NumericError(
            f"parameter {name}={value} sits on the domain boundary; "
            "finite differences need an interior point"
        )
    return h


def _pnd_derivatives(
    theta: ParamSet,
    params: tuple[str, ...],
    cutoff,
    step: float,
    tol: float,
):
    """Model grid, tail, and central-difference derivatives for each parameter."""
    for name in params:
        if name not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {name!r}; choose from {PARAM_NAMES}")
    base = model_pnd(theta, cutoff, tol)
    dprobs, dtails = [], []
    for name in params:
        h = _difference_step(theta, name, step)
        value = getattr(theta, name)
        hi = model_pnd(theta.replace(**{name: value + h}), cutoff, tol)
        lo = model_pnd(theta.replace(**{name: value - h}), cutoff, tol)
        dp = (hi.probs - lo.probs) / (2.0 * h)
        if not np.isfinite(dp).all():
            bad = np.argwhere(~np.isfinite(dp))[0]
            raise NumericError(f"non-finite derivative of p at bin {tuple(bad)}")
        dprobs.append(dp)
        dtails.append((hi.tail_mass - lo.tail_mass) / (2.0 * h))
    return base, dprobs, dtails


def classical_fim(
    theta: ParamSet,
    params: tuple[str, ...] = PARAM_NAMES,
    cutoff=None,
    step: float = 1e-5,
    tol: float = 1e-14,
    p_floor: float = 1e-300,
    tail_floor: float = 1e-9,
) -> FisherMatrix:
    """Fisher information of the count distribution, per shot.

    H_ij = sum over outcomes of (d_i p)(d_j p)/p, with derivatives from
    central differences of ``model_pnd``.  Outcomes are the grid bins with
    p >= p_floor plus, when its mass is at least ``tail_floor``, the
    aggregated beyond-cutoff event, so the information always corresponds to
    a genuine measurement.  Below ``tail_floor`` the tail's finite-difference
    derivative is dominated by series-truncation noise while its true
    contribution is negligible, so it is dropped.

    Args:
        theta: evaluation point, interior in every differentiated parameter.
        params: parameter names to differentiate, default all five.
        cutoff: grid cutoff per arm; defaults to ``default_cutoff(theta)``.
        step: relative step, h_i = step * max(|theta_i|, 0.1).
        tol: series truncation tolerance passed to the model.
        p_floor: bins below this probability are excluded.
        tail_floor: minimum tail mass for the aggregated event to count.
    """
    if cutoff is None:
        cutoff = default_cutoff(theta)
    base, dprobs, dtails = _pnd_derivatives(theta, tuple(params), cutoff, step, tol)
    mask = base.probs >= p_floor
    use_tail = base.tail_mass >= tail_floor
    k = len(dprobs)
    h = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            s = float(np.sum(dprobs[i][mask] * dprobs[j][mask] / base.probs[mask]))
            if use_tail:
                s += dtails[i] * dtails[j] / base.tail_mass
            h[i, j] = h[j, i] = s
    return FisherMatrix(labels=tuple(params), entries=h)


def observed_fim(
    hist,
    theta_hat: ParamSet,
    params: tuple[str, ...] = PARAM_NAMES,
    step: float = 1e-5,
    tol: float = 1e-14,
    p_floor: float = 1e-300,
) -> FisherMatrix:
    """Data-weighted information F_jk = sum mu_mn (d_j ln p)(d_k ln p) at theta_hat.

    ``hist`` may be a Histogram or a plain count grid.  Its grid shape sets
    the model cutoff.  Occupied bins the model cannot explain (p below
    ``p_floor``) raise, naming the bin.
    """
    counts = np.asarray(getattr(hist, "counts", hist), dtype=float)
    if counts.ndim != 2 or counts.sum() <= 0:
        raise ValueError("histogram must be a nonempty two-dimensional count grid")
    cutoff = (counts.shape[0] - 1, counts.shape[1] - 1)
    base, dprobs, _ = _pnd_derivatives(theta_hat, tuple(params), cutoff, step, tol)
    occupied = counts > 0
    starved = occupied & (base.probs < p_floor)
    if starved.any():
        bad = tuple(int(v) for v in np.argwhere(starved)[0])
        raise NumericError(
            f"bin {bad} holds counts but the model assigns it no probability"
        )
    k = len(dprobs)
    f = np.empty((k, k))
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = [np.where(occupied, dp / base.probs, 0.0) for dp in dprobs]
    for i in range(k):
        for j in range(i, k):
            f[i, j] = f[j, i] = float(
                np.sum(counts[occupied] * scores[i][occupied] * scores[j][occupied])
            )
    return FisherMatrix(labels=tuple(params), entries=f)


def reparametrize_fim(
    fim: FisherMatrix,
    jacobian: np.ndarray,
    labels: tuple[str, ...] | None = None,
) -> FisherMatrix:
    """Transform an information matrix to new coordinates: J^T F J.

    ``jacobian[i, j]`` is the derivative of old parameter i with respect to
    new parameter j; it must be square and invertible.
    """
    jac = np.asarray(jacobian, dtype=float)
    n = len(fim.labels)
    if jac.shape != (n, n):
        raise ValueError(f"jacobian must be {n}x{n}, got {jac.shape}")
    if not np.isfinite(jac).all() or np.linalg.matrix_rank(jac) < n:
        raise ValueError("jacobian is singular")
    entries = jac.T @ fim.entries @ jac
    entries = 0.5 * (entries + entries.T)
    return FisherMatrix(labels=tuple(labels) if labels else fim.labels, entries=entries)


def qfim_coherent(alpha_sq: float, beta_sq: float) -> FisherMatrix:
    """Quantum Fisher matrix of a two-arm coherent probe: diag(4|alpha|^2, 4|beta|^2)."""
    if alpha_sq < 0.0 or beta_sq < 0.0:
        raise ValueError("mean photon numbers must be >= 0")
    return FisherMatrix(
        labels=ETA_LABELS, entries=np.diag([4.0 * alpha_sq, 4.0 * beta_sq])
    )


def qfim_fock(m: float, n: float, eta1: float, eta2: float) -> FisherMatrix:
    """Quantum Fisher matrix of a two-arm Fock probe: diag(4m/(1-eta1^2), 4n/(1-eta2^2))."""
    if m < 0.0 or n < 0.0:
        raise ValueError("photon numbers must be >= 0")
    if not (0.0 <= eta1 < 1.0) or not (0.0 <= eta2 < 1.0):
        raise ValueError(
            "transmission amplitudes must lie in [0, 1); information diverges at eta = 1"
        )
    return FisherMatrix(
        labels=ETA_LABELS,
        entries=np.diag([4.0 * m / (1.0 - eta1**2), 4.0 * n / (1.0 - eta2**2)]),
    )


def qfim_lowloss_tmsv(eta1: float, eta2: float, r: float) -> FisherMatrix:
    """Low-loss approximation to the twin-beam quantum Fisher matrix over (eta1, eta2).

    E [[1/(1 - eta1) - (3/2 + 5E), -4 - 3E], [-4 - 3E, 1/(1 - eta2) - (3/2 + 5E)]]
    with E = 2 sinh(r)^2, valid to first order in (1 - eta_i).  Evaluating far
    from eta_i ~ 1 emits a LowLossValidityWarning.
    """
    if eta1 >= 1.0 or eta2 >= 1.0:
        raise ValueError("diagonal diverges at eta = 1; the approximation needs eta < 1")
    if eta1 <= 0.0 or eta2 <= 0.0:
        raise ValueError("transmission amplitudes must be positive")
    if r <= 0.0:
        raise ValueError(f"squeezing parameter must be > 0, got r={r}")
    if min(eta1, eta2) < 0.9:
        warnings.warn(
            "low-loss expansion evaluated at eta < 0.9; first-order accuracy is lost",
            LowLossValidityWarning,
            stacklevel=2,
        )
    energy = 2.0 * np.sinh(r) ** 2
    diag_shift = 1.5 + 5.0 * energy
    off = -4.0 - 3.0 * energy
    entries = energy * np.array(
        [
            [1.0 / (1.0 - eta1) - diag_shift, off],
            [off, 1.0 / (1.0 - eta2) - diag_shift],
        ]
    )
    # far from eta ~ 1 the expansion loses positive semidefiniteness; keep the
    # raw entries and bypass the constructor check so callers can inspect them
    matrix = object.__new__(FisherMatrix)
    object.__setattr__(matrix, "labels", ETA_LABELS)
    object.__setattr__(matrix, "entries", entries)
    return matrix


def qfim_tmsv(eta1: float, eta2: float, r: float) -> FisherMatrix:
    """Exact three-parameter twin-beam quantum Fisher matrix over (eta1, eta2, r)."""
    qfim, cond = three_param_qfim(eta1, eta2, r)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericError(f"variance bound is ill conditioned (condition number {cond:.3g})")
    return FisherMatrix(labels=("eta1", "eta2", "r"), entries=qfim)


def total_variance(fim: FisherMatrix) -> float:
    """Trace of the (eta1, eta2) block of the inverse information matrix.

    Parameters beyond eta1 and eta2 act as jointly estimated nuisance
    parameters through the block of the full inverse.
    """
    i = fim.index("eta1")
    j = fim.index("eta2")
    inverse = _safe_inverse(fim.entries)
    return float(inverse[i, i] + inverse[j, j])


def sensitivity(fim: FisherMatrix) -> float:
    """Reciprocal of the total (eta1, eta2) variance."""
    return 1.0 / total_variance(fim)


@dataclasses.dataclass(frozen=True)
class CrossoverCurve:
    """Locus of (eta1, eta2) where twin-beam and coherent sensitivities match."""

    r: float
    source: str
    points: np.ndarray

    def diagonal_point(self) -> float:
        """The eta1 = eta2 crossing, if the diagonal ray produced one."""
        if self.points.size == 0:
            raise ValueError("curve has no points")
        sym = np.abs(self.points[:, 0] - self.points[:, 1])
        best = int(sym.argmin())
        if sym[best] > 1e-6:
            raise ValueError("curve has no diagonal point")
        return float(self.points[best].mean())


def _pnrd_sensitivity(eta1: float, eta2: float, r: float, tol: float) -> float:
    theta = ParamSet(eta1=eta1, eta2=eta2, r=r)
    fim = classical_fim(theta, params=ETA_LABELS, cutoff=default_cutoff(theta), tol=tol)
    try:
        return sensitivity(fim)
    except NumericError:
        return -np.inf


def _sensitivity_for_source(source: str, eta1: float, eta2: float, r: float, tol: float) -> float:
    if source == "pnrd-fim":
        return _pnrd_sensitivity(eta1, eta2, r, tol)
    if source == "three-param-qfim":
        bounds = qfim_inverse_analytic(eta1, eta2, r).entries
        return 1.0 / float(bounds[0, 0] + bounds[1, 1])
    if source == "lowloss-qfim":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowLossValidityWarning)
            fim = qfim_lowloss_tmsv(eta1, eta2, r)
        if fim.smallest_eigenvalue() <= 0.0:
            # outside its validity regime the expansion stops being an
            # information matrix; treat as no quantum advantage
            return -np.inf
        return sensitivity(fim)
    raise ValueError(
        f"unknown information source {source!r}; choose pnrd-fim, "
        "three-param-qfim, or lowloss-qfim"
    )


def crossover_curve(
    r: float,
    source: str = "pnrd-fim",
    n_rays: int = 17,
    eta_floor: float = 0.02,
    eta_ceiling: float = 1.0 - 1e-6,
    tol: float = 1e-14,
    n_bisect: int = 40,
) -> CrossoverCurve:
    """Locate the equal-sensitivity frontier against an equal-energy coherent probe.

    The comparator puts E = 2 sinh(r)^2 photons split evenly across the arms,
    giving sensitivity E.  Rays from the origin through the (eta1, eta2)
    square are bisected on the sign of the sensitivity difference; rays with
    no sign change produce no point.

    Args:
        r: squeezing parameter, > 0.
        source: twin-beam information source, one of pnrd-fim (exact counting
            statistics over eta1, eta2 at known r), three-param-qfim (quantum
            bound with r as nuisance), lowloss-qfim (first-order expansion).
        n_rays: number of rays; 1 keeps only the diagonal.
        eta_floor: smallest amplitude probed along a ray.
        eta_ceiling: largest amplitude probed.
        tol: series tolerance for pnrd-fim evaluations.
        n_bisect: bisection iterations per ray.
    """
    if r <= 0.0:
        raise ValueError(f"squeezing parameter must be > 0, got r={r}")
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    energy = 2.0 * np.sinh(r) ** 2

    if n_rays == 1:
        angles = np.array([np.pi / 4.0])
    else:
        spread = np.arctan2(eta_floor, eta_ceiling)
        angles = np.linspace(spread, np.pi / 2.0 - spread, n_rays)

    points = []
    for angle in angles:
        direction = np.array([np.cos(angle), np.sin(angle)])
        s_max = eta_ceiling / direction.max()
        s_min = eta_floor / direction.min()
        if s_min >= s_max:
            continue

        def gap(s: float) -> float:
            e1, e2 = s * direction
            return _sensitivity_for_source(source, e1, e2, r, tol) - energy

        lo, hi = s_min, s_max
        g_lo, g_hi = gap(lo), gap(hi)
        if not (g_lo < 0.0 < g_hi):
            continue
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        points.append(0.5 * (lo + hi) * direction)

    points_arr = np.array(points) if points else np.empty((0, 2))
    return CrossoverCurve(r=r, source=source, points=points_arr)
