"""Random rotations, uniform sphere points, the heat-kernel angle
distribution and Monte Carlo spherical sensitivity.

Brownian motion here is generated by the Laplace-Beltrami operator itself
(not half of it), matching the flat comparison where each tangent
coordinate has variance ``2t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .polynomial import HarmonicDecomposition, MonomialPlan, SparsePolynomial
from .special_functions import GegenbauerBasis, area_ratio

SERIES_TOL = 1e-7
SERIES_MAX_L = 400
TRIAL_BLOCK = 4096


class SDEInstabilityError(RuntimeError):
    """The Euler-Maruyama path left [0, pi] by more than one reflection."""


class SeriesTooSlowError(ValueError):
    """The zonal series needs more than SERIES_MAX_L terms at this t."""


# randomness -----------------------------------------------------------------


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for stream ``key`` under ``seed``.

    Streams with different keys are independent, so trial blocks can run in
    any order and still reproduce bit for bit.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(int(rng))


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    std_error: float
    trials: int
    seed: int

    @classmethod
    def from_samples(cls, samples, seed: int) -> "Estimate":
        samples = np.asarray(samples, dtype=float)
        if samples.size < 2:
            raise ValueError("an estimate needs at least 2 trials")
        se = float(np.std(samples, ddof=1) / math.sqrt(samples.size))
        return cls(float(np.mean(samples)), se, int(samples.size), int(seed))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "trials": self.trials, "seed": self.seed}


# rotations and sphere points --------------------------------------------------


@dataclass(frozen=True)
class Rotation:
    n: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.shape != (self.n, self.n):
            raise ValueError(f"matrix must be {self.n}x{self.n}")
        if np.max(np.abs(M.T @ M - np.eye(self.n))) > 1e-10:
            raise ValueError("matrix is not orthogonal within 1e-10")
        if abs(np.linalg.det(M) - 1.0) > 1e-10:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "matrix", M)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``R x`` for a vector, or row-wise for an ``(N, n)`` array."""
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T

    def inverse_apply(self, x: np.ndarray) -> np.ndarray:
        """``R^T x``, row-wise."""
        return np.asarray(x, dtype=float) @ self.matrix


def haar_rotation(n: int, rng) -> Rotation:
    """Haar-random element of SO(n).

    QR of a Gaussian matrix with the diagonal of R made positive is Haar on
    O(n); negating the first column when det = -1 lands in SO(n).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = _as_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return Rotation(n, q)


def sample_uniform_sphere(n: int, rng, size: int | None = None) -> np.ndarray:
    rng = _as_rng(rng)
    shape = (n,) if size is None else (size, n)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_tangent(u: np.ndarray, rng) -> np.ndarray:
    """Uniform unit vector(s) orthogonal to the row(s) of ``u``."""
    rng = _as_rng(rng)
    u = np.asarray(u, dtype=float)
    g = rng.standard_normal(u.shape)
    g = g - np.sum(g * u, axis=-1, keepdims=True) * u
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


# heat kernel angle ------------------------------------------------------------


def _log_dims(n: int, L: int) -> np.ndarray:
    l = np.arange(L + 1, dtype=float)
    # d_l = (n + 2l - 2)/(n - 2) * C(n + l - 3, l)
    return (
        np.log(n + 2 * l - 2)
        - math.log(n - 2)
        + gammaln(n + l - 2)
        - gammaln(l + 1)
        - gammaln(n - 2)
    )


def truncation_degree(n: int, t: float, tol: float = SERIES_TOL, search: int = 5000) -> int:
    """Smallest L with ``sum_{l > L} exp(-t l (n + l - 2)) d_l < tol``."""
    if t <= 0:
        raise ValueError("t must be positive")
    l = np.arange(search + 1, dtype=float)
    log_terms = -t * l * (n + l - 2) + _log_dims(n, search)
    terms = np.exp(log_terms)
    tails = np.cumsum(terms[::-1])[::-1]  # tails[j] = sum_{l >= j}
    ok = np.nonzero(tails < tol)[0]
    if not len(ok):
        raise SeriesTooSlowError(f"series does not converge within {search} terms at t={t}")
    return max(int(ok[0]) - 1, 0)


def t_min(n: int, tol: float = SERIES_TOL, max_L: int = SERIES_MAX_L) -> float:
    """Smallest t for which the truncated series needs at most ``max_L`` terms."""
    lo, hi = 1e-8, 1.0
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        try:
            L = truncation_degree(n, mid, tol)
        except SeriesTooSlowError:
            L = max_L + 1
        if L > max_L:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class HeatRadialDistribution:
    """Law of the angle travelled by spherical Brownian motion in time t."""

    n: int
    t: float
    mode: str
    truncation_L: int
    r_grid: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    density: np.ndarray | None = field(default=None, repr=False)

    def expectation(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """``E[fn(r)]`` by integrating against the tabulated CDF."""
        if self.density is not None:
            return float(np.trapezoid(fn(self.r_grid) * self.density, self.r_grid))
        mids = 0.5 * (self.r_grid[1:] + self.r_grid[:-1])
        return float(np.sum(fn(mids) * np.diff(self.cdf)))

    def cdf_at(self, r) -> np.ndarray:
        return np.interp(r, self.r_grid, self.cdf)


def heat_density(n: int, t: float, r: np.ndarray, L: int) -> np.ndarray:
    """Density of the angle: ``area_ratio * sin^(n-2) r * sum_l e^{-t l (n+l-2)} sqrt(d_l) gamma_l(cos r)``."""
    basis = GegenbauerBasis(n, L)
    gam = basis.eval_all(np.clip(np.cos(r), -1.0, 1.0))
    l = np.arange(L + 1, dtype=float)
    decay = np.exp(-t * l * (n + l - 2) + 0.5 * _log_dims(n, L))
    kernel = decay @ gam
    return area_ratio(n) * np.sin(r) ** (n - 2) * kernel


def build_heat_distribution(
    n: int,
    t: float,
    tol: float = SERIES_TOL,
    grid: int = 8192,
    mode: str = "series",
    rng=None,
    samples: int = 200_000,
) -> HeatRadialDistribution:
    """Tabulate the angle CDF on ``grid`` points of [0, pi].

    ``mode="series"`` sums the zonal heat-kernel series; below ``t_min(n)``
    it refuses and ``mode="sde"`` must be used, which builds an empirical
    CDF from ``simulate_jacobi_angle``.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if t <= 0:
        raise ValueError("t must be positive")
    if grid < 4096:
        raise ValueError("grid must have at least 4096 points")
    r = np.linspace(0.0, math.pi, grid)
    if mode == "sde":
        draws = np.sort(simulate_jacobi_angle(n, t, rng=0 if rng is None else rng, size=samples))
        cdf = np.searchsorted(draws, r, side="right") / draws.size
        return HeatRadialDistribution(n, t, "sde", 0, r, cdf)
    if mode != "series":
        raise ValueError(f"unknown mode {mode!r}")
    try:
        L = truncation_degree(n, t, tol)
    except SeriesTooSlowError:
        L = SERIES_MAX_L + 1
    if L > SERIES_MAX_L:
        raise SeriesTooSlowError(
            f"t={t} is below t_min(n={n}) = {t_min(n, tol):.3g}; use mode='sde'"
        )
    density = heat_density(n, t, r, L)
    floor = -1e-8 * np.max(density)
    if np.min(density) < floor:
        raise ArithmeticError(f"heat density negative ({np.min(density):.3e}) at t={t}")
    density = np.clip(density, 0.0, None)
    steps = 0.5 * (density[1:] + density[:-1]) * np.diff(r)
    cdf = np.concatenate([[0.0], np.cumsum(steps)])
    density = density / cdf[-1]
    cdf = cdf / cdf[-1]
    return HeatRadialDistribution(n, t, "series", L, r, cdf, density)


def sample_heat_angle(dist: HeatRadialDistribution, rng, size: int | None = None):
    """Inverse-CDF draws of the angle, in [0, pi]."""
    rng = _as_rng(rng)
    q = rng.random(size)
    # repeated CDF values (flat stretches) are collapsed to keep interp monotone
    cdf, keep = np.unique(dist.cdf, return_index=True)
    return np.interp(q, cdf, dist.r_grid[keep])


def _cot_minus_inv(s: np.ndarray) -> np.ndarray:
    """``cot s - 1/s``, bounded on (0, pi/2]."""
    small = s < 1e-3
    safe = np.where(small, 1.0, s)
    series = -s / 3.0 - s**3 / 45.0
    return np.where(small, series, 1.0 / np.tan(safe) - 1.0 / safe)


def simulate_jacobi_angle(
    n: int, t: float, dt: float | None = None, rng=0, size: int | None = None
):
    """Integrate ``dr = (n - 2) cot(r) dt + sqrt(2) dW`` on [0, pi].

    Each step works with the distance ``s`` to the nearer pole.  The singular
    part ``(n - 2)/s`` of the drift is advanced exactly as the radius of a
    flat (n-1)-dimensional Brownian step, which also reflects the path at the
    pole; the bounded remainder ``(n - 2)(cot s - 1/s)`` gets an Euler step.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if t < 0:
        raise ValueError("t must be >= 0")
    rng = _as_rng(rng)
    shape = () if size is None else (size,)
    if t == 0:
        return np.zeros(shape) if size is not None else 0.0
    dt = t / 1000 if dt is None else dt
    if dt > t / 100:
        raise ValueError("dt must be <= t/100")
    steps = int(math.ceil(t / dt - 1e-9))
    dt = t / steps
    sq = math.sqrt(2.0 * dt)
    r = np.zeros(shape)
    for _ in range(steps):
        flip = r > 0.5 * math.pi
        s = np.where(flip, math.pi - r, r)
        s = s + (n - 2) * dt * _cot_minus_inv(s)
        radial = s + sq * rng.standard_normal(shape)
        s = np.sqrt(radial**2 + 2.0 * dt * rng.chisquare(n - 2, size=shape))
        if np.any(s > math.pi):
            raise SDEInstabilityError(f"step overshot the far pole (dt={dt:.3g}); reduce dt")
        r = np.where(flip, math.pi - s, s)
        r = np.abs(r)
        r = np.where(r > math.pi, 2 * math.pi - r, r)
    return r if size is not None else float(r)


def sample_flat_radius(n: int, t: float, rng, size: int | None = None):
    """Distance from the origin of Brownian motion on R^{n-1} at time t
    (variance 2t per coordinate)."""
    rng = _as_rng(rng)
    return np.sqrt(2.0 * t * rng.chisquare(n - 1, size=size))


def mean_angle_bounds(n: int, t: float) -> tuple[float, float]:
    """Crude and chi-refined upper bounds on the expected angle."""
    if t < 0:
        raise ValueError("t must be >= 0")
    crude = math.sqrt(2.0 * (n - 1) * t)
    refined = 2.0 * math.exp(gammaln(0.5 * n) - gammaln(0.5 * (n - 1))) * math.sqrt(t)
    return crude, refined


# spherical sensitivity --------------------------------------------------------


def sign_evaluator(p: SparsePolynomial) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``x -> sgn p(x)`` with ``sgn(0) = +1``."""
    plan = MonomialPlan(p)
    return lambda X: np.where(plan.evaluate(X) >= 0, 1.0, -1.0)


def heat_angle_sampler(n: int, t: float) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Series sampler when ``t >= t_min(n)``, SDE sampler otherwise."""
    try:
        dist = build_heat_distribution(n, t)
    except SeriesTooSlowError:
        return lambda rng, size: simulate_jacobi_angle(n, t, rng=rng, size=size)
    return lambda rng, size: sample_heat_angle(dist, rng, size)


def spherical_sensitivity_mc(
    sign_fn: Callable[[np.ndarray], np.ndarray],
    n: int,
    t: float,
    trials: int,
    seed: int,
    sampler: Callable | None = None,
) -> Estimate:
    """``Pr[g(u) != g(v)]`` with u uniform and v the time-t Brownian image of u,
    realized along a uniformly random great circle through u."""
    if trials < 100:
        raise ValueError("need at least 100 trials")
    if t == 0:
        return Estimate(0.0, 0.0, trials, seed)
    sampler = sampler or heat_angle_sampler(n, t)
    hits = np.empty(trials)
    for b, start in enumerate(range(0, trials, TRIAL_BLOCK)):
        size = min(TRIAL_BLOCK, trials - start)
        rng = make_rng(seed, b)
        u = sample_uniform_sphere(n, rng, size)
        w = sample_tangent(u, rng)
        r = sampler(rng, size)[:, None]
        v = u * np.cos(r) + w * np.sin(r)
        hits[start : start + size] = sign_fn(u) != sign_fn(v)
    return Estimate.from_samples(hits, seed)


def spherical_sensitivity_exact(dec: HarmonicDecomposition, t: float) -> float:
    """``(1/2) sum_l ||f_l||^2 (1 - exp(-t l (n + l - 2)))``."""
    n = dec.n
    return 0.5 * sum(
        s * (1.0 - math.exp(-t * l * (n + l - 2))) for (l, _), s in zip(dec.parts, dec.norms)
    )


def spherical_sensitivity_relaxed(dec: HarmonicDecomposition, t: float) -> float:
    """The same sum with the eigenvalue replaced by ``l n``."""
    n = dec.n
    return 0.5 * sum(s * (1.0 - math.exp(-t * l * n)) for (l, _), s in zip(dec.parts, dec.norms))
