"""End-to-end Monte Carlo checks of the rotated-sensitivity bounds.

Every check returns a :class:`BoundReport`.  One-sided bounds pass when
``mean <= bound + k * se`` with ``k = config.slack_sigmas``; equalities pass
when ``|mean - value| <= k * se`` with ``k = config.equality_sigmas``.  When
the bound is itself a Monte Carlo estimate its standard error is combined in
quadrature with the left-hand side's.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .boolean_analysis import (
    cube_points,
    heat_time_from_eps,
    popcounts,
    sgn,
    walsh_hadamard_batch,
)
from .polynomial import (
    DECOMPOSE_BUDGET,
    BudgetError,
    HarmonicDecomposition,
    MonomialPlan,
    SparsePolynomial,
    harmonic_decompose,
)
from .special_functions import GegenbauerBasis, harmonic_dimension, kravchuk
from .sphere import (
    Estimate,
    haar_rotation,
    make_rng,
    sample_uniform_sphere,
    sign_evaluator,
    spherical_sensitivity_exact,
    spherical_sensitivity_mc,
)

MAX_ROTATED_N = 14

# stream tags for derived seeds
_TAG_SS = 1
_TAG_EDGES = 2
_TAG_POLY = 3
_TAG_POLE = 4


@dataclass(frozen=True)
class ExperimentConfig:
    slack_sigmas: float = 3.0
    equality_sigmas: float = 4.0
    # display-only (1 + C eps) and (1 + C/n) inflation of the bare bounds
    inflation_c: float = 1.0
    rotations: int = 200
    appendix_rotations: int = 10_000
    ss_trials: int = 20_000
    # absolute floor for equality checks whose standard error is exactly zero
    atol: float = 1e-12
    workers: int | None = None


DEFAULT_CONFIG = ExperimentConfig()

REPORT_CSV_COLUMNS = (
    "name",
    "pass",
    "estimate_mean",
    "estimate_std_error",
    "trials",
    "seed",
    "bound",
    "bound_std_error",
    "slack_sigmas",
    "params",
)


@dataclass(frozen=True)
class BoundReport:
    name: str
    estimate: Estimate
    bound: float
    slack_sigmas: float | None
    passed: bool
    params: dict = field(default_factory=dict)
    bound_std_error: float = 0.0
    kind: str = "upper"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "estimate": self.estimate.to_dict(),
            "bound": self.bound,
            "bound_std_error": self.bound_std_error,
            "kind": self.kind,
            "slack_sigmas": self.slack_sigmas,
            "pass": self.passed,
        }

    def csv_row(self) -> list:
        return [
            self.name,
            str(self.passed).lower(),
            repr(self.estimate.mean),
            repr(self.estimate.std_error),
            self.estimate.trials,
            self.estimate.seed,
            repr(self.bound),
            repr(self.bound_std_error),
            "" if self.slack_sigmas is None else repr(self.slack_sigmas),
            json.dumps(self.params, sort_keys=True),
        ]


def upper_bound_report(
    name: str,
    estimate: Estimate,
    bound: float,
    params: dict,
    config: ExperimentConfig = DEFAULT_CONFIG,
    bound_std_error: float = 0.0,
) -> BoundReport:
    se = math.hypot(estimate.std_error, bound_std_error)
    slack = (bound - estimate.mean) / se if se > 0 else None
    passed = estimate.mean <= bound + config.slack_sigmas * se
    return BoundReport(name, estimate, float(bound), slack, bool(passed), params, bound_std_error)


def equality_report(
    name: str,
    estimate: Estimate,
    value: float,
    params: dict,
    sigmas: float,
    config: ExperimentConfig = DEFAULT_CONFIG,
) -> BoundReport:
    se = estimate.std_error
    slack = (value - estimate.mean) / se if se > 0 else None
    passed = abs(estimate.mean - value) <= sigmas * se + config.atol
    return BoundReport(name, estimate, float(value), slack, bool(passed), params, 0.0, "equality")


def derive_seed(seed: int, *key: int) -> int:
    """Independent 63-bit seed for the sub-experiment named by ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def random_polynomial(n: int, d: int, seed: int) -> SparsePolynomial:
    return SparsePolynomial.random(n, d, make_rng(seed))


def polynomial_digest(p: SparsePolynomial) -> str:
    text = json.dumps(p.to_json_terms(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_mask(k_mask, n: int) -> int:
    """Bitmask from an int or a 0/1 string whose i-th character is coordinate i."""
    if isinstance(k_mask, str):
        if len(k_mask) != n or set(k_mask) - {"0", "1"}:
            raise ValueError(f"mask {k_mask!r} must be a 0/1 string of length {n}")
        return sum(1 << i for i, ch in enumerate(k_mask) if ch == "1")
    k = int(k_mask)
    if not 0 <= k < 2**n:
        raise ValueError(f"mask {k} out of range for n={n}")
    return k


def _map_indexed(fn: Callable[[int], np.ndarray], count: int, workers: int | None) -> np.ndarray:
    """``[fn(i) for i in range(count)]`` stacked; order-independent by construction."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, range(count)))
    else:
        results = [fn(i) for i in range(count)]
    return np.array(results)


# rotated sensitivities ------------------------------------------------------


def _check_rotated(p: SparsePolynomial, rotations: int) -> None:
    if p.n > MAX_ROTATED_N:
        raise ValueError(f"n = {p.n} exceeds {MAX_ROTATED_N} for exact per-rotation transforms")
    if rotations < 50:
        raise ValueError("need at least 50 rotations")
    if math.comb(p.n + p.degree, p.degree) > DECOMPOSE_BUDGET:
        raise BudgetError(f"monomial count C({p.n + p.degree}, {p.degree}) exceeds budget")


def rotated_statistics(
    p: SparsePolynomial,
    eps_list: Sequence[float],
    rotations: int,
    seed: int,
    mode: str = "sign",
    workers: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-rotation NS at each eps (shape ``(rotations, len(eps_list))``) and
    per-rotation AS (shape ``(rotations,)``) of ``Rp`` restricted to the cube.

    Rotation ``i`` is drawn from stream ``(seed, i)``.
    """
    if mode not in ("sign", "raw"):
        raise ValueError(f"mode must be 'sign' or 'raw', got {mode!r}")
    _check_rotated(p, rotations)
    n = p.n
    for eps in eps_list:
        if not 0.0 <= eps <= 0.5:
            raise ValueError(f"eps must lie in [0, 1/2], got {eps}")
    pts = cube_points(n)
    plan = MonomialPlan(p)
    weights = popcounts(n)
    rho = np.array([(1.0 - 2.0 * e) ** weights for e in eps_list])

    def one(i: int) -> np.ndarray:
        R = haar_rotation(n, make_rng(seed, i))
        values = plan.evaluate(R.inverse_apply(pts))
        if mode == "sign":
            values = sgn(values)
        energy = walsh_hadamard_batch(values) ** 2
        ns = 0.5 * (1.0 - rho) @ energy
        return np.append(ns, energy @ weights)

    stats = _map_indexed(one, rotations, workers)
    return stats[:, :-1], stats[:, -1]


def expected_ns_rotated(
    p: SparsePolynomial,
    eps: float | Sequence[float],
    rotations: int,
    seed: int,
    mode: str = "sign",
    workers: int | None = None,
):
    """``E_R NS_eps`` of ``sgn(Rp)`` (or raw ``Rp``) on the cube."""
    scalar = np.ndim(eps) == 0
    eps_list = [float(eps)] if scalar else [float(e) for e in eps]
    ns, _ = rotated_statistics(p, eps_list, rotations, seed, mode, workers)
    ests = [Estimate.from_samples(ns[:, j], seed) for j in range(len(eps_list))]
    return ests[0] if scalar else ests


def expected_as_rotated(
    p: SparsePolynomial,
    rotations: int,
    seed: int,
    mode: str = "sign",
    method: str = "wht",
    edges_per_rotation: int = 256,
    workers: int | None = None,
) -> Estimate:
    """``E_R AS`` of ``sgn(Rp)`` on the cube.

    ``method="wht"`` uses the exact spectrum per rotation.  ``method="edges"``
    samples random cube edges per rotation and returns n times the observed
    sign-change frequency (sign mode only).
    """
    if method == "wht":
        _, as_ = rotated_statistics(p, [0.0], rotations, seed, mode, workers)
        return Estimate.from_samples(as_, seed)
    if method != "edges":
        raise ValueError(f"unknown method {method!r}")
    if mode != "sign":
        raise ValueError("the edge estimator is only defined for sign functions")
    _check_rotated(p, rotations)
    n = p.n
    plan = MonomialPlan(p)
    edge_seed = derive_seed(seed, _TAG_EDGES)

    def one(i: int) -> float:
        R = haar_rotation(n, make_rng(seed, i))
        rng = make_rng(edge_seed, i)
        x = np.where(rng.random((edges_per_rotation, n)) < 0.5, 1.0, -1.0) / math.sqrt(n)
        j = rng.integers(0, n, edges_per_rotation)
        y = x.copy()
        y[np.arange(edges_per_rotation), j] *= -1.0
        fx = sgn(plan.evaluate(R.inverse_apply(x)))
        fy = sgn(plan.evaluate(R.inverse_apply(y)))
        return n * float(np.mean(fx != fy))

    return Estimate.from_samples(_map_indexed(one, rotations, workers), seed)


# closed forms from the expected-energy identity ---------------------------------


def appendix_energy_closed_form(n: int, ell: int, weight: int) -> float:
    """Expected energy at one character of Hamming weight ``weight`` of a
    Haar-rotated degree-``ell`` harmonic with unit sphere norm:
    ``2^-n / sqrt(d_ell) * sum_h kappa_weight(h) gamma_ell(1 - 2h/n)``."""
    basis = GegenbauerBasis(n, ell)
    z = 1.0 - 2.0 * np.arange(n + 1) / n
    gam = basis.eval_all(np.clip(z, -1.0, 1.0))[ell]
    kap = np.array([kravchuk(n, weight, h) for h in range(n + 1)], dtype=float)
    return float(kap @ gam) / 2**n / math.sqrt(harmonic_dimension(n, ell))


def expected_energy_by_weight(n: int, ell: int) -> np.ndarray:
    """Total expected energy at each Hamming weight 0..n for a unit-norm
    degree-``ell`` harmonic."""
    return np.array(
        [math.comb(n, w) * appendix_energy_closed_form(n, ell, w) for w in range(n + 1)]
    )


def expected_ns_closed_form(dec: HarmonicDecomposition, eps: float) -> float:
    """``E_R NS_eps(Rp|_H)`` for raw ``p``, summed harmonic by harmonic."""
    n = dec.n
    weights = np.arange(n + 1)
    rho = (1.0 - 2.0 * eps) ** weights
    total = 0.0
    for (l, _), s in zip(dec.parts, dec.norms):
        total += 0.5 * s * float(expected_energy_by_weight(n, l) @ (1.0 - rho))
    return total


def expected_as_closed_form(dec: HarmonicDecomposition) -> float:
    n = dec.n
    return sum(
        s * float(expected_energy_by_weight(n, l) @ np.arange(n + 1))
        for (l, _), s in zip(dec.parts, dec.norms)
    )


# transfer checks ------------------------------------------------------------


def _poly_params(p: SparsePolynomial) -> dict:
    return {"n": p.n, "d": p.degree, "poly_digest": polynomial_digest(p)}


def verify_transfer(
    p: SparsePolynomial,
    eps: float,
    rotations: int,
    seed: int,
    mode: str = "raw",
    config: ExperimentConfig = DEFAULT_CONFIG,
) -> BoundReport:
    """``E_R NS_eps(Rf|_H) <= SS_t(f)`` with ``t = ln(1/(1-2 eps))/n``.

    ``mode="raw"`` takes ``f = p`` with the spectral definitions of both
    sides; ``mode="sign"`` takes ``f = sgn p`` with a Monte Carlo right side.
    """
    n = p.n
    t = heat_time_from_eps(eps, n)
    lhs = expected_ns_rotated(p, eps, rotations, seed, mode, config.workers)
    params = {**_poly_params(p), "eps": eps, "t": t, "mode": mode, "rotations": rotations, "seed": seed}
    if mode == "raw":
        rhs, rhs_se = spherical_sensitivity_exact(harmonic_decompose(p), t), 0.0
    else:
        ss_seed = derive_seed(seed, _TAG_SS)
        est = spherical_sensitivity_mc(sign_evaluator(p), n, t, config.ss_trials, ss_seed)
        rhs, rhs_se = est.mean, est.std_error
        params["ss_trials"] = config.ss_trials
    return upper_bound_report("transfer_ns", lhs, rhs, params, config, rhs_se)


def verify_transfer_as(
    p: SparsePolynomial,
    alpha: float,
    rotations: int,
    seed: int,
    mode: str = "raw",
    config: ExperimentConfig = DEFAULT_CONFIG,
) -> BoundReport:
    """``E_R AS(Rf|_H) <= 2n/(1 - e^-alpha) * SS_{alpha/n^2}(f)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = p.n
    t = alpha / n**2
    factor = 2.0 * n / -math.expm1(-alpha)
    lhs = expected_as_rotated(p, rotations, seed, mode, workers=config.workers)
    params = {**_poly_params(p), "alpha": alpha, "t": t, "mode": mode, "rotations": rotations, "seed": seed}
    if mode == "raw":
        rhs, rhs_se = factor * spherical_sensitivity_exact(harmonic_decompose(p), t), 0.0
    else:
        est = spherical_sensitivity_mc(
            sign_evaluator(p), n, t, config.ss_trials, derive_seed(seed, _TAG_SS)
        )
        rhs, rhs_se = factor * est.mean, factor * est.std_error
        params["ss_trials"] = config.ss_trials
    return upper_bound_report("transfer_as", lhs, rhs, params, config, rhs_se)


def verify_appendix_energy(
    n: int,
    ell: int,
    k_mask,
    rotations: int,
    seed: int,
    config: ExperimentConfig = DEFAULT_CONFIG,
    block: int = 512,
) -> BoundReport:
    """Monte Carlo ``E_R |hat{Rf}(k)|^2`` for ``f = gamma_ell(w . x)`` against
    the Kravchuk-Gegenbauer closed form (two-sided)."""
    if not 3 <= n <= 12:
        raise ValueError("n must lie in 3..12")
    if not 0 <= ell <= 4:
        raise ValueError("ell must lie in 0..4")
    k = parse_mask(k_mask, n)
    weight = bin(k).count("1")
    pole = sample_uniform_sphere(n, make_rng(derive_seed(seed, _TAG_POLE)))
    basis = GegenbauerBasis(n, ell)
    pts = cube_points(n)

    def one(i: int) -> float:
        R = haar_rotation(n, make_rng(seed, i))
        z = np.clip(pts @ R.apply(pole), -1.0, 1.0)
        values = basis.eval_all(z)[ell]
        return float(walsh_hadamard_batch(values)[k] ** 2)

    energies = _map_indexed(one, rotations, config.workers)
    est = Estimate.from_samples(energies, seed)
    closed = appendix_energy_closed_form(n, ell, weight)
    params = {"n": n, "ell": ell, "k_mask": k, "k_weight": weight, "rotations": rotations, "seed": seed}
    return equality_report("appendix_energy", est, closed, params, config.equality_sigmas, config)


def verify_cos_remark(
    d: int,
    n: int,
    eps: float,
    trials: int,
    seed: int,
    config: ExperimentConfig = DEFAULT_CONFIG,
) -> BoundReport:
    """``E[cos angle(x, y)] = 1 - 2 eps`` for a cube point and its eps-flip."""
    if n < 3:
        raise ValueError("n must be >= 3")
    if not 0.0 <= eps <= 0.5:
        raise ValueError("eps must lie in [0, 1/2]")
    rng = make_rng(seed)
    x = np.where(rng.random((trials, n)) < 0.5, 1.0, -1.0)
    flips = rng.random((trials, n)) < eps
    y = np.where(flips, -x, x)
    cosines = np.sum(x * y, axis=1) / n
    est = Estimate.from_samples(cosines, seed)
    params = {"d": d, "n": n, "eps": eps, "trials": trials, "seed": seed}
    return equality_report("cos_remark", est, 1.0 - 2.0 * eps, params, config.slack_sigmas, config)


def gotsman_linial_sweep(
    d_list: Sequence[int],
    n_list: Sequence[int],
    eps_list: Sequence[float],
    rotations: int,
    seed: int,
    t_list: Sequence[float] = (0.001, 0.01),
    polys_per_cell: int = 1,
    config: ExperimentConfig = DEFAULT_CONFIG,
) -> list[BoundReport]:
    """NS, AS and SS bounds for random degree-d polynomials.

    Bounds: ``(2/pi) d sqrt(eps) (1 + C eps)`` for NS,
    ``(2/pi) d sqrt(n) (1 + C/n)`` for AS and ``(d/pi) sqrt(2 n t)`` for SS.
    """
    c = config.inflation_c
    reports = []
    for d in d_list:
        for n in n_list:
            for rep in range(polys_per_cell):
                poly_seed = derive_seed(seed, _TAG_POLY, d, n, rep)
                p = random_polynomial(n, d, poly_seed)
                base = {"d": d, "n": n, "poly_seed": poly_seed, "seed": seed, "replicate": rep}
                rot_seed = derive_seed(seed, d, n, rep)
                if eps_list:
                    ns, as_ = rotated_statistics(p, eps_list, rotations, rot_seed, "sign", config.workers)
                else:
                    _, as_ = rotated_statistics(p, [0.0], rotations, rot_seed, "sign", config.workers)
                for j, eps in enumerate(eps_list):
                    bare = 2.0 / math.pi * d * math.sqrt(eps)
                    params = {**base, "eps": eps, "rotations": rotations, "bare_bound": bare, "inflation_c": c}
                    est = Estimate.from_samples(ns[:, j], rot_seed)
                    reports.append(upper_bound_report("gl_ns", est, bare * (1 + c * eps), params, config))
                bare = 2.0 / math.pi * d * math.sqrt(n)
                params = {**base, "rotations": rotations, "bare_bound": bare, "inflation_c": c}
                reports.append(
                    upper_bound_report("gl_as", Estimate.from_samples(as_, rot_seed), bare * (1 + c / n), params, config)
                )
                for jt, t in enumerate(t_list):
                    ss_seed = derive_seed(seed, _TAG_SS, d, n, rep, jt)
                    est = spherical_sensitivity_mc(sign_evaluator(p), n, t, config.ss_trials, ss_seed)
                    bound = d / math.pi * math.sqrt(2.0 * n * t)
                    params = {**base, "t": t, "trials": config.ss_trials}
                    reports.append(upper_bound_report("gl_ss", est, bound, params, config))
    return reports


def with_config(**overrides) -> ExperimentConfig:
    return replace(DEFAULT_CONFIG, **overrides)
