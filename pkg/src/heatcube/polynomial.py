"""Sparse multivariate polynomials: evaluation, rotation, harmonic
decomposition, sphere norms and restriction to great circles."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

Exponent = tuple[int, ...]

DECOMPOSE_BUDGET = 2_000_000
ROTATION_BUDGET = 100_000_000


class PolynomialFormatError(ValueError):
    """Malformed polynomial JSON."""


class BudgetError(ValueError):
    """The requested symbolic operation exceeds the configured size budget."""


class DecompositionError(RuntimeError):
    """The harmonic projection solve left a residual above tolerance."""


class IdenticallyZeroRestriction(ValueError):
    """The polynomial vanishes identically on the requested great circle."""


class RootCountWarning(RuntimeWarning):
    """Companion-matrix and sign-change root counts disagree."""


class SparsePolynomial:
    """Real polynomial in ``n`` variables stored as exponent -> coefficient.

    Instances are treated as immutable; every operation returns a new
    polynomial in canonical form (no stored zero coefficients).
    """

    __slots__ = ("n", "_terms", "degree")

    def __init__(self, n: int, terms: Mapping[Exponent, float] | Iterable = ()):
        if n < 1:
            raise ValueError("number of variables must be >= 1")
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict[Exponent, float] = {}
        for exps, coeff in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != n:
                raise ValueError(f"exponent vector {exps} has length {len(exps)}, expected {n}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            clean[exps] = clean.get(exps, 0.0) + float(coeff)
        self.n = n
        self._terms = {e: c for e, c in clean.items() if c != 0.0}
        self.degree = max((sum(e) for e in self._terms), default=0)

    # construction -----------------------------------------------------------

    @classmethod
    def constant(cls, n: int, value: float) -> "SparsePolynomial":
        return cls(n, {(0,) * n: value})

    @classmethod
    def variable(cls, n: int, i: int) -> "SparsePolynomial":
        exps = [0] * n
        exps[i] = 1
        return cls(n, {tuple(exps): 1.0})

    @classmethod
    def linear(cls, coeffs: Sequence[float]) -> "SparsePolynomial":
        n = len(coeffs)
        return cls(n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(coeffs)})

    @classmethod
    def norm_squared(cls, n: int) -> "SparsePolynomial":
        """``|x|^2 = x_1^2 + ... + x_n^2``."""
        return cls(n, {tuple(2 * int(i == j) for j in range(n)): 1.0 for i in range(n)})

    @classmethod
    def random(cls, n: int, d: int, rng: np.random.Generator) -> "SparsePolynomial":
        """Independent standard normal coefficient on every monomial of total
        degree <= d."""
        exps = all_monomials(n, d)
        return cls(n, zip(exps, rng.standard_normal(len(exps))))

    # access -----------------------------------------------------------------

    @property
    def terms(self) -> Mapping[Exponent, float]:
        return MappingProxyType(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def __repr__(self) -> str:
        return f"SparsePolynomial(n={self.n}, degree={self.degree}, terms={len(self)})"

    # arithmetic -------------------------------------------------------------

    def _check_same(self, other: "SparsePolynomial") -> None:
        if other.n != self.n:
            raise ValueError(f"variable count mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = SparsePolynomial.constant(self.n, other)
        self._check_same(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0.0) + c
        return SparsePolynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return SparsePolynomial(self.n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return SparsePolynomial(self.n, {e: c * other for e, c in self._terms.items()})
        self._check_same(other)
        out: dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return SparsePolynomial(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        result = SparsePolynomial.constant(self.n, 1.0)
        for _ in range(k):
            result = result * self
        return result

    def allclose(self, other: "SparsePolynomial", atol: float = 1e-10) -> bool:
        diff = self - other
        return diff.max_abs_coeff() <= atol

    def prune(self, atol: float) -> "SparsePolynomial":
        return SparsePolynomial(self.n, {e: c for e, c in self._terms.items() if abs(c) > atol})

    # structure --------------------------------------------------------------

    def homogeneous_components(self) -> dict[int, "SparsePolynomial"]:
        parts: dict[int, dict] = {}
        for e, c in self._terms.items():
            parts.setdefault(sum(e), {})[e] = c
        return {m: SparsePolynomial(self.n, t) for m, t in sorted(parts.items())}

    def derivative(self, i: int) -> "SparsePolynomial":
        out = {}
        for e, c in self._terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                out[tuple(f)] = c * e[i]
        return SparsePolynomial(self.n, out)

    def laplacian(self) -> "SparsePolynomial":
        out: dict[Exponent, float] = {}
        for e, c in self._terms.items():
            for i, ei in enumerate(e):
                if ei >= 2:
                    f = list(e)
                    f[i] -= 2
                    f = tuple(f)
                    out[f] = out.get(f, 0.0) + c * ei * (ei - 1)
        return SparsePolynomial(self.n, out)

    def laplace_beltrami(self) -> "SparsePolynomial":
        """A polynomial agreeing on the unit sphere with the Laplace-Beltrami
        operator applied to ``self`` restricted to the sphere.

        For homogeneous ``h`` of degree m, the polar form of the Euclidean
        Laplacian gives ``Delta_S h = Delta h - m (m + n - 2) h`` on r = 1.
        """
        out = SparsePolynomial(self.n)
        for m, h in self.homogeneous_components().items():
            out = out + h.laplacian() - h * float(m * (m + self.n - 2))
        return out

    # evaluation -------------------------------------------------------------

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return MonomialPlan(self).evaluate(points)

    # serialization ----------------------------------------------------------

    def to_json_terms(self) -> list[dict]:
        return [{"exponents": list(e), "coeff": c} for e, c in sorted(self._terms.items())]


def all_monomials(n: int, d: int) -> list[Exponent]:
    """Exponent vectors of every monomial of total degree <= d, graded."""
    out = []
    for m in range(d + 1):
        for combo in combinations_with_replacement(range(n), m):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def monomials_of_degree(n: int, m: int) -> list[Exponent]:
    out = []
    for combo in combinations_with_replacement(range(n), m):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return out


def evaluate(p: SparsePolynomial, x) -> float:
    """Direct term sum at one point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({p.n},)")
    total = 0.0
    for e, c in p.terms.items():
        term = c
        for xi, ei in zip(x, e):
            if ei:
                term *= xi**ei
        total += term
    return total


class MonomialPlan:
    """Batched evaluation of a fixed polynomial at many points.

    Every monomial is obtained from a lower-degree parent by one extra
    multiplication, so the cost is one multiply per (point, monomial).
    """

    def __init__(self, p: SparsePolynomial):
        self.n = p.n
        index: dict[Exponent, int] = {(0,) * p.n: 0}
        parents, variables = [0], [-1]
        for e in sorted(p.terms, key=lambda e: (sum(e), e)):
            self._insert(e, index, parents, variables)
        self.parents = np.array(parents)
        self.variables = np.array(variables)
        self.coeffs = np.zeros(len(index))
        for e, c in p.terms.items():
            self.coeffs[index[e]] = c

    @staticmethod
    def _insert(e, index, parents, variables) -> int:
        if e in index:
            return index[e]
        v = next(i for i, ei in enumerate(e) if ei)
        parent = list(e)
        parent[v] -= 1
        pidx = MonomialPlan._insert(tuple(parent), index, parents, variables)
        index[e] = len(parents)
        parents.append(pidx)
        variables.append(v)
        return index[e]

    def evaluate(self, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        if points.shape[1] != self.n:
            raise ValueError(f"points have {points.shape[1]} columns, expected {self.n}")
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], chunk):
            block = points[start : start + chunk]
            vals = np.empty((len(self.parents), block.shape[0]))
            vals[0] = 1.0
            xt = block.T
            for j in range(1, len(self.parents)):
                vals[j] = vals[self.parents[j]] * xt[self.variables[j]]
            out[start : start + chunk] = self.coeffs @ vals
        return out[0] if single else out


def _as_matrix(R) -> np.ndarray:
    return np.asarray(getattr(R, "matrix", R), dtype=float)


def rotate_polynomial(p: SparsePolynomial, R) -> SparsePolynomial:
    """``(Rp)(x) = p(R^T x)``, expanded symbolically."""
    M = _as_matrix(R)
    n = p.n
    if M.shape != (n, n):
        raise ValueError(f"rotation has shape {M.shape}, expected ({n}, {n})")
    if np.max(np.abs(M.T @ M - np.eye(n))) > 1e-8:
        raise ValueError("matrix is not orthogonal (|R^T R - I| > 1e-8)")
    cost = math.comb(n + p.degree, p.degree) * n**p.degree
    if cost > ROTATION_BUDGET:
        raise BudgetError(f"rotation cost estimate {cost} exceeds budget {ROTATION_BUDGET}")
    # x_i <- sum_j M[j, i] x_j
    forms = [SparsePolynomial.linear(M[:, i]) for i in range(n)]
    powers: dict[tuple[int, int], SparsePolynomial] = {}

    def power(i: int, k: int) -> SparsePolynomial:
        if (i, k) not in powers:
            powers[(i, k)] = forms[i] if k == 1 else power(i, k - 1) * forms[i]
        return powers[(i, k)]

    out: dict[Exponent, float] = {}
    for e, c in p.terms.items():
        term = SparsePolynomial.constant(n, c)
        for i, k in enumerate(e):
            if k:
                term = term * power(i, k)
        for f, v in term.terms.items():
            out[f] = out.get(f, 0.0) + v
    return SparsePolynomial(n, out)


# sphere integrals -----------------------------------------------------------


def sphere_monomial_moment(exps: Sequence[int]) -> float:
    """``E_{x in S_{n-1}}[prod x_i^a_i]``; zero unless every exponent is even."""
    a = np.asarray(exps)
    if np.any(a % 2):
        return 0.0
    n = len(a)
    log_m = (
        np.sum(gammaln(0.5 * (a + 1)))
        - 0.5 * n * math.log(math.pi)
        + gammaln(0.5 * n)
        - gammaln(0.5 * (a.sum() + n))
    )
    return float(math.exp(log_m))


def sphere_norm_squared(p: SparsePolynomial) -> float:
    """``E_{x in S}[p(x)^2]`` from closed-form monomial moments."""
    if p.is_zero():
        return 0.0
    n = p.n
    E = np.array(list(p.terms.keys()), dtype=np.int64)
    c = np.array(list(p.terms.values()))
    total = 0.0
    block = max(1, 2_000_000 // (len(c) * n))
    for start in range(0, len(c), block):
        S = E[start : start + block, None, :] + E[None, :, :]
        even = np.all(S % 2 == 0, axis=2)
        log_m = (
            np.sum(gammaln(0.5 * (S + 1)), axis=2)
            - 0.5 * n * math.log(math.pi)
            + gammaln(0.5 * n)
            - gammaln(0.5 * (S.sum(axis=2) + n))
        )
        moments = np.where(even, np.exp(log_m), 0.0)
        total += float(c[start : start + block] @ moments @ c)
    return total


def fischer_norm_squared(h: SparsePolynomial) -> float:
    """Sphere norm of a homogeneous *harmonic* polynomial via the Fischer
    product ``sum a! c_a^2 / (n (n + 2) ... (n + 2l - 2))``."""
    comps = h.homogeneous_components()
    if len(comps) > 1:
        raise ValueError("polynomial is not homogeneous")
    if h.is_zero():
        return 0.0
    l = h.degree
    denom = math.prod(h.n + 2 * j for j in range(l))
    fischer = sum(
        c * c * math.prod(math.factorial(a) for a in e) for e, c in h.terms.items()
    )
    return fischer / denom


# harmonic decomposition -----------------------------------------------------


@dataclass(frozen=True)
class HarmonicDecomposition:
    """``p = sum_l f_l`` on the sphere, each ``f_l`` homogeneous harmonic."""

    n: int
    parts: tuple[tuple[int, SparsePolynomial], ...]
    norms: tuple[float, ...]

    @property
    def degrees(self) -> list[int]:
        return [l for l, _ in self.parts]

    def norm_by_degree(self) -> dict[int, float]:
        return {l: s for (l, _), s in zip(self.parts, self.norms)}

    def total(self) -> SparsePolynomial:
        out = SparsePolynomial(self.n)
        for _, h in self.parts:
            out = out + h
        return out


def _harmonic_split(h: SparsePolynomial, m: int, out: dict[int, SparsePolynomial]) -> None:
    """Split homogeneous ``h`` of degree ``m`` into ``H + |x|^2 q`` with ``H``
    harmonic, then recurse on ``q``."""
    if h.is_zero():
        return
    n = h.n
    if m < 2:
        out[m] = out.get(m, SparsePolynomial(n)) + h
        return
    basis = monomials_of_degree(n, m - 2)
    col = {e: j for j, e in enumerate(basis)}
    r2 = SparsePolynomial.norm_squared(n)
    A = np.zeros((len(basis), len(basis)))
    for j, e in enumerate(basis):
        image = (r2 * SparsePolynomial(n, {e: 1.0})).laplacian()
        for f, v in image.terms.items():
            A[col[f], j] = v
    rhs = np.zeros(len(basis))
    for f, v in h.laplacian().terms.items():
        rhs[col[f]] = v
    q_coeffs = np.linalg.solve(A, rhs)
    q = SparsePolynomial(n, zip(basis, q_coeffs))
    harmonic = h - r2 * q
    residual = harmonic.laplacian().max_abs_coeff()
    scale = max(h.max_abs_coeff(), 1.0)
    if residual > 1e-9 * scale:
        raise DecompositionError(f"harmonic residual {residual:.3e} at degree {m}")
    out[m] = out.get(m, SparsePolynomial(n)) + harmonic
    _harmonic_split(q, m - 2, out)


def harmonic_decompose(p: SparsePolynomial) -> HarmonicDecomposition:
    """Decompose ``p`` restricted to the sphere into spherical harmonics."""
    n, d = p.n, p.degree
    if math.comb(n + d, d) > DECOMPOSE_BUDGET:
        raise BudgetError(f"monomial basis C({n + d}, {d}) exceeds {DECOMPOSE_BUDGET}")
    pieces: dict[int, SparsePolynomial] = {}
    for m, h in p.homogeneous_components().items():
        _harmonic_split(h, m, pieces)
    parts = tuple((l, pieces[l]) for l in sorted(pieces) if not pieces[l].is_zero())
    norms = tuple(sphere_norm_squared(h) for _, h in parts)
    return HarmonicDecomposition(n=n, parts=parts, norms=norms)


# great circles --------------------------------------------------------------


@dataclass(frozen=True)
class CircleRestriction:
    """``theta -> p(u cos theta + w sin theta)`` in two equivalent forms.

    ``cos_sin_poly[m][b]`` is the coefficient of ``c^(m-b) s^b``;
    ``fourier_form[j + d]`` is the coefficient of ``e^(i j theta)``.
    """

    u: np.ndarray
    w: np.ndarray
    degree: int
    cos_sin_poly: tuple[np.ndarray, ...]
    fourier_form: np.ndarray
    scale: float

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        j = np.arange(-self.degree, self.degree + 1)
        phases = np.exp(1j * np.multiply.outer(theta, j))
        return np.real(phases @ self.fourier_form)

    def eval_cos_sin(self, theta):
        theta = np.asarray(theta, dtype=float)
        c, s = np.cos(theta), np.sin(theta)
        total = np.zeros_like(theta)
        for m, coeffs in enumerate(self.cos_sin_poly):
            for b, v in enumerate(coeffs):
                if v:
                    total = total + v * c ** (m - b) * s**b
        return total


def restrict_to_great_circle(p: SparsePolynomial, u, w) -> CircleRestriction:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != (p.n,) or w.shape != (p.n,):
        raise ValueError("frame vectors must have length n")
    if abs(u @ u - 1) > 1e-10 or abs(w @ w - 1) > 1e-10 or abs(u @ w) > 1e-10:
        raise ValueError("u, w must be orthonormal within 1e-10")
    d = p.degree
    cs = [np.zeros(m + 1) for m in range(d + 1)]
    for e, c in p.terms.items():
        poly = np.array([c])
        for i, k in enumerate(e):
            for _ in range(k):
                poly = np.convolve(poly, [u[i], w[i]])
        cs[len(poly) - 1] += poly
    # c = (z + 1/z)/2, s = (z - 1/z)/(2i); multiply through by z^m
    fourier = np.zeros(2 * d + 1, dtype=complex)
    for m, coeffs in enumerate(cs):
        for b, v in enumerate(coeffs):
            if v == 0.0:
                continue
            zpoly = np.array([1.0 + 0j])
            for _ in range(m - b):
                zpoly = np.convolve(zpoly, [1.0, 0.0, 1.0])
            for _ in range(b):
                zpoly = np.convolve(zpoly, [1.0, 0.0, -1.0])
            zpoly = zpoly * v / (2.0**m * (1j) ** b)
            # zpoly is highest-power first, powers 2m..0, shifted by -m
            for idx, coef in enumerate(zpoly):
                fourier[(2 * m - idx) - m + d] += coef
    scale = sum(abs(c) for c in p.terms.values())
    return CircleRestriction(u, w, d, tuple(cs), fourier, scale)


def count_circle_roots(
    restriction: CircleRestriction, tol: float = 1e-8, grid: int = 4096
) -> int:
    """Roots of the restriction on [0, 2 pi), counted with multiplicity via
    companion-matrix eigenvalues of ``z^d * sum_j c_j z^j`` near |z| = 1."""
    coeffs = restriction.fourier_form
    if np.max(np.abs(coeffs)) <= tol * max(restriction.scale, 1e-300):
        raise IdenticallyZeroRestriction("restriction vanishes identically on the circle")
    big = np.max(np.abs(coeffs))
    nz = np.nonzero(np.abs(coeffs) > 1e-14 * big)[0]
    algebraic = coeffs[nz[0] : nz[-1] + 1]
    roots = np.roots(algebraic[::-1]) if len(algebraic) > 1 else np.array([])
    count = int(np.sum(np.abs(np.abs(roots) - 1.0) < tol))

    theta = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    values = restriction(theta)
    signs = np.where(values >= 0, 1, -1)
    changes = int(np.sum(signs != np.roll(signs, 1)))
    if changes > count:
        warnings.warn(
            f"sign-change scan found {changes} crossings but eigenvalue count is {count}",
            RootCountWarning,
            stacklevel=2,
        )
    return count


# JSON term format -----------------------------------------------------------


def parse_polynomial_json(text: str) -> SparsePolynomial:
    """Parse ``[{"exponents": [...], "coeff": c}, ...]``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolynomialFormatError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, list) or not data:
        raise PolynomialFormatError("polynomial must be a non-empty JSON array of terms")
    n = None
    terms = []
    for idx, term in enumerate(data):
        if not isinstance(term, dict):
            raise PolynomialFormatError(f"term {idx}: expected an object")
        if "exponents" not in term or "coeff" not in term:
            raise PolynomialFormatError(f"term {idx}: missing field 'exponents' or 'coeff'")
        exps, coeff = term["exponents"], term["coeff"]
        if not isinstance(exps, list) or not all(
            isinstance(e, int) and not isinstance(e, bool) for e in exps
        ):
            raise PolynomialFormatError(f"term {idx}: field 'exponents' must be a list of integers")
        if any(e < 0 for e in exps):
            raise PolynomialFormatError(f"term {idx}: field 'exponents' has a negative entry")
        if not isinstance(coeff, (int, float)) or isinstance(coeff, bool):
            raise PolynomialFormatError(f"term {idx}: field 'coeff' must be a number")
        if n is None:
            n = len(exps)
        elif len(exps) != n:
            raise PolynomialFormatError(
                f"term {idx}: field 'exponents' has length {len(exps)}, expected {n}"
            )
        terms.append((tuple(exps), float(coeff)))
    if not n:
        raise PolynomialFormatError("term 0: field 'exponents' must be non-empty")
    return SparsePolynomial(n, terms)


def polynomial_to_json(p: SparsePolynomial) -> str:
    return json.dumps(p.to_json_terms())
