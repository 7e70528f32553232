"""Likelihood-ratio detectors on RSS and differential-RSS observations.

Both detectors reduce to a linear test statistic on the observation vector;
false-positive and detection rates then have closed forms through the
Gaussian tail function.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "DetectorError",
    "DegenerateSpecError",
    "DetectorSpec",
    "RatePair",
    "RocCurve",
    "q_function",
    "drss_transform",
    "build_d_matrix",
    "test_statistic",
    "decide",
    "analytic_rates",
    "roc_sweep",
    "default_threshold_grid",
    "roc_to_csv",
    "roc_from_csv",
]


class DetectorError(ValueError):
    """Invalid detector specification or observation."""


class DegenerateSpecError(DetectorError):
    """The two hypothesis means coincide; the LRT carries no information."""


def q_function(x):
    """Gaussian upper-tail probability Q(x) = P(Z > x) for standard normal Z."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class DetectorSpec:
    """One configured detector: mode, hypothesis means, covariance, threshold.

    ``mode`` is "rss" (N-dimensional observations, covariance R) or "drss"
    ((N-1)-dimensional differenced observations, covariance D).
    ``log_threshold`` is the log of the likelihood-ratio threshold.
    """

    mode: str
    mu0: np.ndarray
    mu1: np.ndarray
    cov: np.ndarray
    log_threshold: float = 0.0

    def __post_init__(self):
        if self.mode not in ("rss", "drss"):
            raise DetectorError(f"unknown detector mode: {self.mode!r}")
        mu0 = np.asarray(self.mu0, dtype=float).reshape(-1)
        mu1 = np.asarray(self.mu1, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "cov", cov)
        if mu0.shape != mu1.shape or cov.shape != (mu0.size, mu0.size):
            raise DetectorError("mean/covariance dimensions are inconsistent")
        if np.array_equal(mu0, mu1):
            raise DegenerateSpecError("hypothesis means are identical")
        try:
            delta = np.linalg.solve(cov, mu1 - mu0)
        except np.linalg.LinAlgError as exc:
            raise DetectorError("covariance is singular") from exc
        # Precompute the statistic direction c = cov^-1 (mu1 - mu0) and the
        # separation s = (mu1 - mu0)^T cov^-1 (mu1 - mu0).
        s = float((mu1 - mu0) @ delta)
        if not np.isfinite(s) or s <= 0.0:
            raise DegenerateSpecError(f"non-positive separation: {s}")
        object.__setattr__(self, "_direction", delta)
        object.__setattr__(self, "_separation", s)

    @property
    def separation(self) -> float:
        """Squared Mahalanobis distance between the hypothesis means."""
        return self._separation

    @property
    def statistic_threshold(self) -> float:
        """Threshold on the linear statistic equivalent to log_threshold."""
        return float(self.log_threshold + 0.5 * self._direction @ (self.mu1 + self.mu0))


@dataclass(frozen=True)
class RatePair:
    """(false-positive rate, detection rate) at one threshold."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise DetectorError("rates must lie in [0, 1]")


@dataclass(frozen=True)
class RocCurve:
    """Threshold-swept operating points, sorted by alpha ascending."""

    thresholds: tuple  # ln(lambda), descending
    points: tuple  # RatePair, alpha ascending
    auc: float
    separation: float


def drss_transform(y: np.ndarray) -> np.ndarray:
    """Differential observations: subtract the last element from the others."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] < 2:
        raise DetectorError("DRSS needs at least two observations")
    return y[..., :-1] - y[..., -1:]


def build_d_matrix(cov: np.ndarray) -> np.ndarray:
    """Covariance of the differenced observations.

    D_mn = R_NN + R_mn - R_mN - R_nN for m, n = 1..N-1.
    """
    r = np.asarray(cov, dtype=float)
    n = r.shape[0]
    if r.shape != (n, n) or n < 2:
        raise DetectorError("covariance must be square with N >= 2")
    return r[n - 1, n - 1] + r[:-1, :-1] - r[:-1, -1:] - r[-1:, :-1]


def test_statistic(spec: DetectorSpec, obs: np.ndarray):
    """Linear statistic (mu1 - mu0)^T cov^-1 obs; obs may be (..., dim)."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape[-1] != spec.mu0.size:
        raise DetectorError("observation dimension does not match the spec")
    return obs @ spec._direction


def decide(spec: DetectorSpec, obs: np.ndarray):
    """True where the detector accepts H1 (flags the user as malicious).

    Equality with the threshold decides H1.
    """
    return test_statistic(spec, obs) >= spec.statistic_threshold


def analytic_rates(spec: DetectorSpec, log_threshold: float | None = None) -> RatePair:
    """Closed-form false-positive and detection rates of the detector."""
    lam = spec.log_threshold if log_threshold is None else log_threshold
    s = spec.separation
    rt = np.sqrt(s)
    alpha = float(q_function((lam + 0.5 * s) / rt))
    beta = float(q_function((lam - 0.5 * s) / rt))
    return RatePair(alpha=alpha, beta=beta)


def default_threshold_grid(separation: float, n: int = 201) -> np.ndarray:
    """Log-threshold grid spanning roughly alpha, beta in [1e-9, 1 - 1e-9]."""
    half = 0.5 * separation + 6.0 * np.sqrt(separation)
    return np.linspace(-half, half, n)


def roc_sweep(spec: DetectorSpec, thresholds) -> RocCurve:
    """Sweep the threshold, returning operating points and trapezoidal AUC."""
    thr = np.sort(np.asarray(thresholds, dtype=float))[::-1]
    if thr.size < 2:
        raise DetectorError("need at least two thresholds")
    points = tuple(analytic_rates(spec, t) for t in thr)
    alphas = np.array([pt.alpha for pt in points])
    betas = np.array([pt.beta for pt in points])
    a = np.concatenate(([0.0], alphas, [1.0]))
    b = np.concatenate(([0.0], betas, [1.0]))
    auc = float(np.trapezoid(b, a))
    return RocCurve(
        thresholds=tuple(float(t) for t in thr),
        points=points,
        auc=auc,
        separation=spec.separation,
    )


def roc_to_csv(curve: RocCurve) -> str:
    """Serialize a curve as CSV with a trailing metadata comment line."""
    buf = io.StringIO()
    buf.write("ln_lambda,alpha,beta\n")
    for t, pt in zip(curve.thresholds, curve.points):
        buf.write(f"{t:.12g},{pt.alpha:.12g},{pt.beta:.12g}\n")
    buf.write(f"# s={curve.separation:.12g} auc={curve.auc:.12g}\n")
    return buf.getvalue()


def roc_from_csv(text: str) -> RocCurve:
    """Parse the CSV format written by :func:`roc_to_csv`."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if lines[0] != "ln_lambda,alpha,beta":
        raise DetectorError("unexpected CSV header")
    meta = lines[-1]
    if not meta.startswith("# s="):
        raise DetectorError("missing metadata line")
    fields = dict(part.split("=", 1) for part in meta[2:].split())
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[1:-1]]
    return RocCurve(
        thresholds=tuple(r[0] for r in rows),
        points=tuple(RatePair(r[1], r[2]) for r in rows),
        auc=float(fields["auc"]),
        separation=float(fields["s"]),
    )
