"""Full-covariance 2-D Gaussian mixtures fitted by EM, with BIC + Kneedle model selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Decomposition, GaussianComponent, Scatterplot
from .errors import DegenerateFit, PreconditionError, TooShort

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GmmFitConfig:
    k_max: int = 20
    restarts: int = 5
    max_iters: int = 200
    loglik_tol: float = 1e-4  # on the per-point mean log-likelihood
    covariance_floor: float = 1e-6
    kneedle_sensitivity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_max < 1 or self.restarts < 1 or self.max_iters < 1:
            raise PreconditionError("k_max, restarts and max_iters must be >= 1")
        if self.loglik_tol <= 0 or self.covariance_floor <= 0 or self.kneedle_sensitivity <= 0:
            raise PreconditionError("tolerances must be > 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EMRun:
    """Raw result of one EM run (arrays are in point order of the input)."""

    means: np.ndarray  # (k, 2)
    covs: np.ndarray  # (k, 2, 2)
    weights: np.ndarray  # (k,)
    resp: np.ndarray  # (n, k)
    log_likelihood: float
    history: list = field(default_factory=list)
    converged: bool = False

    def components(self) -> list[GaussianComponent]:
        soft = self.resp.sum(axis=0)
        return [
            GaussianComponent.from_covariance(self.means[j], self.covs[j], soft[j], self.weights[j])
            for j in range(len(self.weights))
        ]


def bic(log_likelihood: float, k: int, n: int) -> float:
    """Schwarz criterion for a k-component 2-D full-covariance mixture (6k - 1 free parameters)."""
    if n < 1 or k < 1:
        raise PreconditionError("bic needs n >= 1 and k >= 1")
    return (6 * k - 1) * math.log(n) - 2.0 * log_likelihood


def _floor_covs(cxx, cxy, cyy, floor):
    """Raise every eigenvalue below `floor` up to it, vectorized over components."""
    half_trace = 0.5 * (cxx + cyy)
    half_diff = 0.5 * (cxx - cyy)
    r = np.hypot(half_diff, cxy)
    lo = half_trace - r
    need = lo < floor
    if not np.any(need):
        return cxx, cxy, cyy
    hi = np.maximum(half_trace + r, floor)
    lo = np.maximum(lo, floor)
    # leading eigenvector direction; isotropic matrices keep the x axis
    theta = 0.5 * np.arctan2(2.0 * cxy, cxx - cyy)
    c, s = np.cos(theta), np.sin(theta)
    fxx = hi * c * c + lo * s * s
    fxy = (hi - lo) * c * s
    fyy = hi * s * s + lo * c * c
    return np.where(need, fxx, cxx), np.where(need, fxy, cxy), np.where(need, fyy, cyy)


def _design(points: np.ndarray) -> np.ndarray:
    """Quadratic basis rows (x^2, xy, y^2, x, y, 1), shape (6, N)."""
    x, y = points[:, 0], points[:, 1]
    return np.ascontiguousarray(np.vstack([x * x, x * y, y * y, x, y, np.ones_like(x)]))


def _estep(phi, means, cxx, cxy, cyy, weights):
    """Responsibilities (k, N) and per-point log-density via one (k, 6) x (6, N) product."""
    det = cxx * cyy - cxy * cxy
    p11, p12, p22 = cyy / det, -cxy / det, cxx / det
    mx, my = means[:, 0], means[:, 1]
    gx = p11 * mx + p12 * my
    gy = p12 * mx + p22 * my
    const = mx * gx + my * gy
    coef = np.empty((len(weights), 6))
    coef[:, 0] = -0.5 * p11
    coef[:, 1] = -p12
    coef[:, 2] = -0.5 * p22
    coef[:, 3] = gx
    coef[:, 4] = gy
    coef[:, 5] = -0.5 * const + np.log(weights) - _LOG_2PI - 0.5 * np.log(det)
    logp = coef @ phi
    top = logp.max(axis=0)
    logp -= top
    np.exp(logp, out=logp)
    total = logp.sum(axis=0)
    logp /= total
    lse = top + np.log(total)
    return logp, lse


def _mstep(phi, resp, floor):
    nk = resp.sum(axis=1)
    stats = (resp @ phi[:5].T) / nk[:, None]
    mx, my = stats[:, 3], stats[:, 4]
    cxx = stats[:, 0] - mx * mx
    cxy = stats[:, 1] - mx * my
    cyy = stats[:, 2] - my * my
    cxx, cxy, cyy = _floor_covs(cxx, cxy, cyy, floor)
    return np.column_stack([mx, my]), cxx, cxy, cyy, nk


def em(
    points: np.ndarray,
    means: np.ndarray,
    cov: np.ndarray,
    weights: np.ndarray,
    cfg: GmmFitConfig,
) -> EMRun:
    """Run EM from the given initial parameters.

    `cov` is either one shared (2, 2) matrix or a (k, 2, 2) stack. Raises
    DegenerateFit when a component's mass falls below 1/(10 N) of the data.
    Internally the data are centred and isotropically rescaled; the returned
    parameters and log-likelihood are in the original units.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    k = means.shape[0]
    origin = points.mean(axis=0)
    scale = math.sqrt(max(float(((points - origin) ** 2).sum(axis=1).mean()) / 2.0, 0.0))
    if not scale > 0.0:
        scale = 1.0
    phi = _design((points - origin) / scale)
    floor = cfg.covariance_floor / scale**2
    cov = np.broadcast_to(np.asarray(cov, dtype=float), (k, 2, 2)) / scale**2
    cxx, cxy, cyy = _floor_covs(cov[:, 0, 0].copy(), cov[:, 0, 1].copy(), cov[:, 1, 1].copy(), floor)
    means = (np.asarray(means, dtype=float) - origin) / scale
    weights = np.asarray(weights, dtype=float).copy()
    min_mass = 0.1  # weight < 1/(10N)  <=>  soft count < 0.1
    ll_shift = -2.0 * n * math.log(scale)

    history = []
    prev = -np.inf
    converged = False
    for _ in range(cfg.max_iters):
        resp, lse = _estep(phi, means, cxx, cxy, cyy, weights)
        ll = float(lse.sum()) + ll_shift
        if not math.isfinite(ll):
            raise DegenerateFit("non-finite log-likelihood")
        history.append(ll)
        if (ll - prev) < cfg.loglik_tol * n:
            converged = True
            break
        prev = ll
        if resp.sum(axis=1).min() < min_mass:
            raise DegenerateFit("a component lost its support")
        means, cxx, cxy, cyy, nk = _mstep(phi, resp, floor)
        weights = nk / n
    if resp.sum(axis=1).min() < min_mass:
        raise DegenerateFit("a component lost its support")
    s2 = scale**2
    covs = np.empty((k, 2, 2))
    covs[:, 0, 0] = cxx * s2
    covs[:, 0, 1] = covs[:, 1, 0] = cxy * s2
    covs[:, 1, 1] = cyy * s2
    return EMRun(means * scale + origin, covs, weights, resp.T, history[-1], history, converged)


def kmeans_pp_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ (D^2-weighted) choice of k initial centers."""
    n = points.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((points - points[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            nxt = int(rng.integers(n))
        else:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        idx.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[idx].copy()


def _restart_rng(seed: int, k: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, k, restart]))


def fit_em(points: np.ndarray, k: int, cfg: GmmFitConfig) -> EMRun:
    """Best-of-restarts EM fit of a k-component mixture to an (N, 2) array."""
    n = points.shape[0]
    if not 1 <= k <= n:
        raise PreconditionError(f"k must lie in [1, {n}], got {k}")
    pooled = np.cov(points.T, bias=True)
    weights = np.full(k, 1.0 / k)
    if k == 1:
        # one step of EM is exact here; no restarts needed
        return em(points, points.mean(axis=0, keepdims=True), pooled, weights, cfg)
    best = None
    failures = []
    for r in range(cfg.restarts):
        rng = _restart_rng(cfg.seed, k, r)
        means = kmeans_pp_seeds(points, k, rng)
        try:
            run = em(points, means, pooled, weights, cfg)
        except DegenerateFit as exc:
            failures.append(str(exc))
            continue
        if best is None or run.log_likelihood > best.log_likelihood:
            best = run
    if best is None:
        raise DegenerateFit(f"all {cfg.restarts} restarts degenerate for k={k}: {failures[0]}")
    return best


def fit_gmm(plot: Scatterplot, k: int, cfg: GmmFitConfig) -> tuple[list[GaussianComponent], float]:
    run = fit_em(plot.points, k, cfg)
    return run.components(), run.log_likelihood


def kneedle_elbow(curve: Sequence[tuple[float, float]], sensitivity: float = 1.0):
    """Knee of a curve assumed decreasing and convex, or None when no knee qualifies.

    Both axes are min-max normalized, the values are flipped (max - y) so the
    curve rises, and the difference to the diagonal is scanned: a local maximum
    of the difference becomes the knee once the difference later drops below
    that maximum minus `sensitivity` times the mean x spacing.
    """
    if len(curve) < 3:
        raise TooShort("kneedle needs at least 3 points")
    xs = np.array([float(p[0]) for p in curve])
    ys = np.array([float(p[1]) for p in curve])
    if np.any(np.diff(xs) <= 0):
        raise PreconditionError("curve x values must be strictly increasing")
    span_x = xs[-1] - xs[0]
    span_y = ys.max() - ys.min()
    if span_y == 0:
        return None
    xn = (xs - xs[0]) / span_x
    yn = (ys - ys.min()) / span_y
    diff = (1.0 - yn) - xn
    eps = 1e-12
    m = len(diff)
    maxima = [
        i
        for i in range(m - 1)
        if diff[i + 1] < diff[i] - eps and (i == 0 or diff[i] >= diff[i - 1] - eps)
    ]
    if not maxima:
        return None
    step = float(np.mean(np.diff(xn)))
    threshold = None
    knee_at = None
    for i in range(m - 1):
        if i in maxima:
            threshold = diff[i] - sensitivity * step
            knee_at = i
        if threshold is not None and diff[i + 1] < threshold:
            x = xs[knee_at]
            return int(x) if float(x).is_integer() else x
    return None


def decompose(plot: Scatterplot, cfg: GmmFitConfig = GmmFitConfig()) -> Decomposition:
    """Sweep k = 1..K_max and pick K_opt on the BIC curve.

    Kneedle runs on the curve from k = 1 up to the BIC minimum; when that
    stretch is shorter than 3 points or shows no knee, the argmin is used.
    """
    pts = plot.points
    n = pts.shape[0]
    k_max = min(cfg.k_max, n)
    runs: dict[int, EMRun] = {}
    curve = []
    for k in range(1, k_max + 1):
        try:
            run = fit_em(pts, k, cfg)
        except DegenerateFit:
            curve.append((k, math.inf))
            continue
        runs[k] = run
        curve.append((k, bic(run.log_likelihood, k, n)))
    if not runs:
        raise DegenerateFit("no component count produced a valid fit")
    if len(runs) < 2 and k_max >= 2:
        raise DegenerateFit("fewer than 2 valid entries on the BIC curve")
    finite = [(k, b) for k, b in curve if math.isfinite(b)]
    k_min = min(finite, key=lambda kb: (kb[1], kb[0]))[0]
    # the knee is sought on the decreasing stretch of the curve, up to its minimum
    head = [(k, b) for k, b in finite if k <= k_min]
    k_opt = kneedle_elbow(head, cfg.kneedle_sensitivity) if len(head) >= 3 else None
    if k_opt is None:
        k_opt = k_min
    best = runs[k_opt]
    comps = best.components()
    # weights are renormalized against float drift so they sum to 1 within 1e-9
    total = sum(c.weight for c in comps)
    comps = [
        GaussianComponent(c.center, c.major_sd, c.minor_sd, c.angle, c.soft_count, c.weight / total)
        for c in comps
    ]
    return Decomposition(tuple(comps), k_opt, tuple(curve), best.log_likelihood)
