"""Harmonic dimensions, normalized Gegenbauer polynomials, Kravchuk
polynomials, sphere areas and Gauss quadrature for the zonal weight.

Conventions: ``n`` is the ambient dimension (the sphere is S_{n-1}) and
``alpha = n/2 - 1``.  The zonal weight is ``(1 - z^2)^(alpha - 1/2)`` on
[-1, 1], normalized so that it integrates to one; under it the normalized
Gegenbauer polynomials ``gamma_l`` are orthonormal and ``gamma_l(1)`` equals
``sqrt(d_l)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.special import gammaln


class QuadratureError(RuntimeError):
    """Raised when the quadrature node solver fails to converge."""


def _check_dimension(n: int, minimum: int = 3) -> None:
    if int(n) != n or n < minimum:
        raise ValueError(f"dimension n must be an integer >= {minimum}, got {n}")


def harmonic_dimension(n: int, l: int) -> int:
    """Dimension of the space of degree-``l`` harmonic homogeneous
    polynomials in ``n`` variables, in exact integer arithmetic."""
    _check_dimension(n)
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    lower = math.comb(n + l - 3, l - 2) if l >= 2 else 0
    return math.comb(n + l - 1, l) - lower


def harmonic_dimension_ratio_form(n: int, l: int) -> int:
    """Same quantity via ``(n + 2l - 2)/(n - 2) * C(n + l - 3, l)``.

    Kept separate so the two closed forms can be checked against each other.
    Raises if the rational value is not an integer.
    """
    _check_dimension(n)
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    value = Fraction(n + 2 * l - 2, n - 2) * math.comb(n + l - 3, l)
    if value.denominator != 1:
        raise ArithmeticError(f"non-integer dimension {value} for n={n}, l={l}")
    return int(value)


def sphere_surface_area(n: int) -> float:
    """Surface area of S_{n-1} in R^n, ``2 pi^(n/2) / Gamma(n/2)``."""
    _check_dimension(n, minimum=2)
    return math.exp(math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n))


def area_ratio(n: int) -> float:
    """``Omega_{n-2} / Omega_{n-1}``: normalizer of the zonal weight."""
    _check_dimension(n)
    return math.exp(gammaln(0.5 * n) - gammaln(0.5 * (n - 1)) - 0.5 * math.log(math.pi))


def zonal_weight(n: int, z):
    """Normalized zonal density ``area_ratio(n) * (1 - z^2)^(alpha - 1/2)``."""
    alpha = 0.5 * n - 1.0
    z = np.asarray(z, dtype=float)
    return area_ratio(n) * np.power(np.clip(1.0 - z * z, 0.0, None), alpha - 0.5)


def gegenbauer_norm(n: int, l: int) -> float:
    """``N^(l) = <G^(l), G^(l)>`` for the unnormalized Gegenbauer G^(l)."""
    _check_dimension(n)
    alpha = 0.5 * n - 1.0
    # alpha/(alpha+l) * C(2 alpha + l - 1, l), as a product of small factors
    value = alpha / (alpha + l)
    for j in range(1, l + 1):
        value *= (2.0 * alpha + j - 1.0) / j
    return value


@dataclass(frozen=True)
class GegenbauerBasis:
    """Normalized zonal polynomials ``gamma_0 .. gamma_L`` for fixed ``n``.

    Evaluation uses the orthonormal three-term recurrence
    ``gamma_l = a_l z gamma_{l-1} - b_l gamma_{l-2}``.
    """

    n: int
    max_degree: int
    alpha: float = field(init=False)
    recurrence_coeffs: np.ndarray = field(init=False, repr=False)
    norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_dimension(self.n)
        if self.max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        alpha = 0.5 * self.n - 1.0
        L = self.max_degree
        norms = np.array([gegenbauer_norm(self.n, l) for l in range(L + 1)])
        coeffs = np.zeros((L + 1, 3))
        for l in range(1, L + 1):
            # N_l / N_{l-1} = (alpha+l-1)/(alpha+l) * (2 alpha + l - 1)/l
            r1 = (alpha + l - 1.0) / (alpha + l) * (2.0 * alpha + l - 1.0) / l
            a = 2.0 * (l + alpha - 1.0) / l / math.sqrt(r1)
            b = 0.0
            if l >= 2:
                r2 = (alpha + l - 2.0) / (alpha + l - 1.0) * (2.0 * alpha + l - 2.0) / (l - 1.0)
                b = (l + 2.0 * alpha - 2.0) / l / math.sqrt(r1 * r2)
            coeffs[l] = (a, b, 0.0)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "recurrence_coeffs", coeffs)
        object.__setattr__(self, "norms", norms)

    def dimensions(self) -> list[int]:
        return [harmonic_dimension(self.n, l) for l in range(self.max_degree + 1)]

    def eval_all(self, z) -> np.ndarray:
        """Array of shape ``(L + 1,) + shape(z)`` holding every gamma_l(z)."""
        z = np.asarray(z, dtype=float)
        if np.any(np.abs(z) > 1.0):
            raise ValueError("gegenbauer argument must satisfy |z| <= 1")
        out = np.empty((self.max_degree + 1,) + z.shape)
        out[0] = 1.0
        if self.max_degree >= 1:
            out[1] = self.recurrence_coeffs[1, 0] * z
        for l in range(2, self.max_degree + 1):
            a, b, _ = self.recurrence_coeffs[l]
            out[l] = a * z * out[l - 1] - b * out[l - 2]
        return out


def gegenbauer_eval(basis: GegenbauerBasis, l: int, z):
    """gamma_l(z); scalar in, scalar out."""
    if not 0 <= l <= basis.max_degree:
        raise ValueError(f"degree {l} outside 0..{basis.max_degree}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) > 1.0):
        raise ValueError("gegenbauer argument must satisfy |z| <= 1")
    a = basis.recurrence_coeffs
    prev, cur = np.zeros_like(z_arr), np.ones_like(z_arr)
    for j in range(1, l + 1):
        prev, cur = cur, a[j, 0] * z_arr * cur - a[j, 1] * prev
    return float(cur) if np.ndim(cur) == 0 else cur


def kravchuk(n: int, k: int, h: int) -> int:
    """Kravchuk polynomial ``sum_j (-1)^j C(k, j) C(n - k, h - j)``.

    Equals the sum of a weight-``k`` character over the weight-``h`` points
    of the cube.
    """
    if not (0 <= k <= n and 0 <= h <= n):
        raise ValueError(f"need 0 <= k, h <= n, got n={n}, k={k}, h={h}")
    return sum(
        (-1) ** j * math.comb(k, j) * math.comb(n - k, h - j)
        for j in range(0, min(k, h) + 1)
        if h - j <= n - k
    )


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for the normalized zonal weight of S_{n-1}.

    ``sum(weights * f(nodes))`` approximates ``<f, 1>_S`` for zonal ``f``;
    exact for polynomials of degree ``<= 2 * len(nodes) - 1``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    n: int

    @property
    def degree(self) -> int:
        return 2 * len(self.nodes) - 1

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def inner(self, f: Callable, g: Callable) -> float:
        return float(np.dot(self.weights, f(self.nodes) * g(self.nodes)))


def gauss_jacobi_rule(n: int, points: int = 64, max_newton: int = 20) -> QuadratureRule:
    """Golub-Welsch rule from the orthonormal recurrence, with Newton
    polishing of the nodes against gamma_points."""
    _check_dimension(n)
    if points < 1:
        raise ValueError("points must be >= 1")
    basis = GegenbauerBasis(n, points)
    # z gamma_{l-1} = (gamma_l + b_l gamma_{l-2}) / a_l, so the Jacobi matrix
    # has off-diagonal 1/a_l and zero diagonal (symmetric weight).
    offdiag = 1.0 / basis.recurrence_coeffs[1:points, 0]
    jacobi = np.diag(offdiag, 1) + np.diag(offdiag, -1)
    try:
        nodes, vecs = np.linalg.eigh(jacobi)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise QuadratureError(f"eigensolver failed for n={n}, points={points}: {exc}") from exc

    a = basis.recurrence_coeffs
    for it in range(1, max_newton + 1):
        vals = basis.eval_all(np.clip(nodes, -1.0, 1.0))
        p = vals[points]
        # d/dz of gamma_m via the derivative recurrence
        dprev, dcur = np.zeros_like(nodes), np.zeros_like(nodes)
        for j in range(1, points + 1):
            dprev, dcur = dcur, a[j, 0] * (vals[j - 1] + nodes * dcur) - a[j, 1] * dprev
        step = p / dcur
        nodes = nodes - step
        if np.max(np.abs(step)) < 1e-15:
            break
    else:
        raise QuadratureError(
            f"Newton polishing did not converge after {max_newton} iterations "
            f"(n={n}, points={points}, last step {np.max(np.abs(step)):.3e})"
        )
    # Christoffel weights 1 / sum_{l < points} gamma_l(z)^2
    vals = basis.eval_all(np.clip(nodes, -1.0, 1.0))[:points]
    weights = 1.0 / np.sum(vals * vals, axis=0)
    return QuadratureRule(nodes=nodes, weights=weights, n=n)


def integrate_zonal(
    f: Callable[[np.ndarray], np.ndarray],
    n: int,
    points: int = 64,
    tol: float = 1e-11,
    max_points: int = 4096,
) -> float:
    """``<f, 1>_S`` for a zonal ``f``; doubles the node count until two
    successive rules agree to ``tol``."""
    rule = gauss_jacobi_rule(n, points)
    previous = rule.integrate(f(rule.nodes))
    while points < max_points:
        points *= 2
        rule = gauss_jacobi_rule(n, points)
        current = rule.integrate(f(rule.nodes))
        if abs(current - previous) <= tol * max(1.0, abs(current)):
            return current
        previous = current
    raise QuadratureError(f"zonal integral not converged at {max_points} points")


def zonal_monomial_moment(n: int, m: int) -> float:
    """``E_S[z^m]`` under the normalized zonal weight (Beta-function identity)."""
    _check_dimension(n)
    if m % 2:
        return 0.0
    alpha = 0.5 * n - 1.0
    # area_ratio * B((m+1)/2, alpha + 1/2)
    log_beta = gammaln(0.5 * (m + 1)) + gammaln(alpha + 0.5) - gammaln(0.5 * (m + 1) + alpha + 0.5)
    return area_ratio(n) * math.exp(log_beta)
