"""Fourier analysis on the embedded hypercube H = {+-1/sqrt(n)}^n.

A table index encodes a cube point bit by bit: bit i (value ``2**i``) set
means coordinate i is ``-1/sqrt(n)``, clear means ``+1/sqrt(n)``.  Index 0 is
therefore the corner ``(1, ..., 1)/sqrt(n)``.  Frequency vectors use the same
bitmask encoding, so ``chi_k(x) = (-1)^popcount(k & x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polynomial import MonomialPlan, SparsePolynomial

MAX_EXACT_N = 24


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_EXACT_N:
        raise ValueError(f"n = {n} exceeds the exact-table limit {MAX_EXACT_N}")


def popcounts(n: int) -> np.ndarray:
    """Hamming weight of every index in ``range(2**n)``."""
    _check_n(n)
    w = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        w = np.concatenate([w, w + 1])
    return w


def cube_signs(n: int) -> np.ndarray:
    """``(2**n, n)`` array of +-1 entries, row = cube index."""
    _check_n(n)
    idx = np.arange(2**n)[:, None]
    bits = (idx >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits


def cube_points(n: int) -> np.ndarray:
    """Every point of H as rows, in table-index order."""
    return cube_signs(n) / math.sqrt(n)


def sgn(values):
    """Sign with ``sgn(0) = +1``."""
    return np.where(np.asarray(values) >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class TruthTable:
    n: int
    values: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (2**self.n,):
            raise ValueError(f"table must have length 2**{self.n}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def is_sign_function(self) -> bool:
        return bool(np.all(np.abs(self.values) == 1.0))


@dataclass(frozen=True)
class FourierSpectrum:
    n: int
    coeffs: np.ndarray
    is_sign_function: bool = False

    def energy(self) -> np.ndarray:
        return self.coeffs**2

    def energy_by_weight(self) -> np.ndarray:
        """Total energy at each Hamming weight 0..n."""
        return np.bincount(popcounts(self.n), weights=self.energy(), minlength=self.n + 1)


def _fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard butterfly along the last axis."""
    a = np.array(a, dtype=float)
    size = a.shape[-1]
    lead = a.shape[:-1]
    h = 1
    while h < size:
        a = a.reshape(lead + (-1, 2, h))
        x, y = a[..., 0, :], a[..., 1, :]
        a = np.stack([x + y, x - y], axis=-2)
        h *= 2
    return a.reshape(lead + (size,))


def walsh_hadamard(table: TruthTable) -> FourierSpectrum:
    """``f_hat(k) = <f, chi_k>_H`` for every k, in O(n 2^n)."""
    coeffs = _fwht(table.values) / 2**table.n
    return FourierSpectrum(table.n, coeffs, table.is_sign_function)


def walsh_hadamard_batch(values: np.ndarray) -> np.ndarray:
    """Spectra of many tables stacked along axis 0."""
    values = np.asarray(values, dtype=float)
    return _fwht(values) / values.shape[-1]


def inverse_walsh_hadamard(spec: FourierSpectrum) -> TruthTable:
    return TruthTable(spec.n, _fwht(spec.coeffs))


def noise_sensitivity_exact(spec: FourierSpectrum, eps: float) -> float:
    """``(1/2) sum_k f_hat(k)^2 (1 - (1 - 2 eps)^|k|)``."""
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"eps must lie in [0, 1/2], got {eps}")
    rho = (1.0 - 2.0 * eps) ** popcounts(spec.n)
    return float(0.5 * np.dot(spec.coeffs**2, 1.0 - rho))


def average_sensitivity_exact(spec: FourierSpectrum) -> float:
    """``sum_k f_hat(k)^2 |k|``."""
    return float(np.dot(spec.coeffs**2, popcounts(spec.n)))


def eps_prime(eps: float) -> float:
    """Cube heat time matching eps-noise: ``(1/2) ln(1/(1 - 2 eps))``."""
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"eps must lie in [0, 1/2), got {eps}")
    return -0.5 * math.log1p(-2.0 * eps)


def heat_time_from_eps(eps: float, n: int) -> float:
    """Sphere heat time ``t`` with ``1 - 2 eps = exp(-t n)``."""
    return 2.0 * eps_prime(eps) / n


def multilinearize(p: SparsePolynomial, n: int | None = None) -> SparsePolynomial:
    """Reduce with ``x_i^2 = 1/n``; agrees with ``p`` on H."""
    n = p.n if n is None else n
    if n != p.n:
        raise ValueError(f"polynomial has {p.n} variables, expected {n}")
    out: dict = {}
    for e, c in p.terms.items():
        reduced = tuple(ei % 2 for ei in e)
        pairs = (sum(e) - sum(reduced)) // 2
        out[reduced] = out.get(reduced, 0.0) + c * n ** (-pairs)
    return SparsePolynomial(n, out)


def restrict_to_cube(
    p: SparsePolynomial, n: int | None = None, threshold: bool = False, points: np.ndarray | None = None
) -> TruthTable:
    """Tabulate ``p`` on H (optionally ``sgn p``).  ``points`` may supply a
    rotated copy of H in the same index order."""
    n = p.n if n is None else n
    if n != p.n:
        raise ValueError(f"polynomial has {p.n} variables, expected {n}")
    _check_n(n)
    pts = cube_points(n) if points is None else points
    values = MonomialPlan(p).evaluate(pts)
    return TruthTable(n, sgn(values) if threshold else values)
