"""Deformed Heisenberg algebras and the scalar quantities derived from them.

The algebra ``[X, P] = i hbar F(sqrt(beta) P)`` is represented through an odd
deformation function ``f`` with ``P = f(sqrt(beta) p) / sqrt(beta)`` where ``p``
is canonical and lives on the finite domain ``[-b, b]``.  Everything the rest
of the package needs (kinetic energy, group velocity, series coefficients,
divided-difference kernel) is derived here.

All evaluators accept scalars or numpy arrays and return the same shape.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AdmissibilityError, DomainError, InversionError, SeriesOrderError

__all__ = [
    "Kind",
    "DeformationSpec",
    "KineticCoefficients",
    "eval_f",
    "eval_f_prime",
    "inverse_f",
    "eval_F",
    "kinetic_energy",
    "kinetic_derivative",
    "taylor_coeffs",
    "divided_difference_kernel",
    "diagonal_threshold",
    "tan_series",
    "load_spec",
    "spec_to_json",
]

# odd Taylor orders kept for the built-in deformations (x^1 .. x^(2*_BUILTIN_TERMS-1))
_BUILTIN_TERMS = 64


class Kind(str, enum.Enum):
    UNDEFORMED = "undeformed"
    KEMPF_TAN = "kempf-tan"
    USER_SERIES = "user-series"


@lru_cache(maxsize=None)
def _tan_series_exact(max_order: int) -> tuple[Fraction, ...]:
    # tan' = 1 + tan^2  =>  (k+1) t_{k+1} = [k == 0] + sum_{i+j=k} t_i t_j
    t = [Fraction(0)] * (max_order + 1)
    for k in range(max_order):
        s = sum((t[i] * t[k - i] for i in range(1, k)), Fraction(0))
        t[k + 1] = (Fraction(int(k == 0)) + s) / (k + 1)
    return tuple(t)


def tan_series(max_order: int) -> np.ndarray:
    """Taylor coefficients of tan(x) at 0 for orders 0..max_order."""
    return np.array([float(c) for c in _tan_series_exact(max_order)])


@dataclass(frozen=True)
class DeformationSpec:
    """A deformed algebra together with its physical constants.

    ``f_series`` holds the full Taylor list of f (index = order, even entries
    zero).  ``closed_f``/``closed_f_prime`` are optional hooks for user
    deformations; when absent the truncated series is evaluated.
    """

    kind: Kind
    beta: float
    hbar: float = 1.0
    mass: float = 1.0
    f_series: tuple[float, ...] = (0.0, 1.0)
    momentum_bound: float = math.inf
    closed_f: Optional[Callable] = field(default=None, compare=False, repr=False)
    closed_f_prime: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.beta < 0:
            raise AdmissibilityError(f"beta must be >= 0, got {self.beta}")
        if self.hbar <= 0 or self.mass <= 0:
            raise AdmissibilityError("hbar and mass must be positive")
        if not self.momentum_bound > 0:
            raise AdmissibilityError("momentum bound must be positive")
        fs = self.f_series
        if len(fs) < 2 or fs[1] != 1.0:
            raise AdmissibilityError("first Taylor coefficient of f must be 1")
        if any(c != 0.0 for c in fs[0::2]):
            raise AdmissibilityError("f must be odd: even-order coefficients must vanish")

    # -- constructors -------------------------------------------------------

    @classmethod
    def undeformed(cls, hbar: float = 1.0, mass: float = 1.0) -> "DeformationSpec":
        return cls(Kind.UNDEFORMED, 0.0, hbar, mass, (0.0, 1.0), math.inf)

    @classmethod
    def kempf_tan(cls, beta: float, hbar: float = 1.0, mass: float = 1.0) -> "DeformationSpec":
        if beta < 0:
            raise AdmissibilityError(f"beta must be >= 0, got {beta}")
        if beta == 0:
            return cls.undeformed(hbar, mass)
        series = tuple(tan_series(2 * _BUILTIN_TERMS - 1))
        return cls(Kind.KEMPF_TAN, float(beta), hbar, mass, series, math.pi / (2 * math.sqrt(beta)))

    @classmethod
    def from_odd_coeffs(
        cls,
        odd_coeffs: Sequence[float],
        beta: float,
        momentum_bound: float,
        hbar: float = 1.0,
        mass: float = 1.0,
        closed_f: Optional[Callable] = None,
        closed_f_prime: Optional[Callable] = None,
    ) -> "DeformationSpec":
        """User deformation from the odd Taylor coefficients ``[c1, c3, c5, ...]``."""
        if len(odd_coeffs) == 0:
            raise AdmissibilityError("need at least the linear coefficient")
        full = [0.0] * (2 * len(odd_coeffs))
        for i, c in enumerate(odd_coeffs):
            full[2 * i + 1] = float(c)
        spec = cls(
            Kind.USER_SERIES, float(beta), hbar, mass, tuple(full),
            float(momentum_bound), closed_f, closed_f_prime,
        )
        _check_monotone(spec)
        return spec

    # -- derived quantities -------------------------------------------------

    @property
    def sqrt_beta(self) -> float:
        return math.sqrt(self.beta)

    @property
    def minimal_length(self) -> float:
        return self.hbar * self.sqrt_beta

    @property
    def is_deformed(self) -> bool:
        return self.beta > 0 and self.kind is not Kind.UNDEFORMED

    @property
    def series_order(self) -> int:
        """Highest Taylor order of f available (infinite for the identity)."""
        if self.kind is Kind.UNDEFORMED:
            return 1 << 30
        return len(self.f_series) - 1

    def series(self, max_order: int) -> np.ndarray:
        """Taylor list of f for orders 0..max_order, padded/validated."""
        if max_order > self.series_order:
            raise SeriesOrderError(
                f"f known to order {self.series_order}, need {max_order}"
            )
        out = np.zeros(max_order + 1)
        n = min(len(self.f_series), max_order + 1)
        out[:n] = self.f_series[:n]
        return out

    def check_momentum(self, p) -> None:
        p = np.asarray(p)
        if np.any(np.abs(p) > self.momentum_bound):
            raise DomainError(f"|p| exceeds the momentum bound {self.momentum_bound}")


def _check_monotone(spec: DeformationSpec, samples: int = 2049) -> None:
    if spec.beta == 0:
        return
    if not math.isfinite(spec.momentum_bound):
        raise AdmissibilityError("user deformations need a finite momentum bound")
    umax = spec.sqrt_beta * spec.momentum_bound
    # stay off the endpoints: closed forms may have poles there
    u = np.linspace(-umax, umax, samples)[1:-1]
    if np.any(eval_f_prime(spec, u) <= 0):
        raise AdmissibilityError("f must be strictly increasing on the momentum domain")


@dataclass(frozen=True)
class KineticCoefficients:
    """Coefficients a_1..a_N of T = (1/2m) sum a_n beta^(n-1) p^(2n)."""

    coeffs: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, n: int) -> float:
        """1-based access, ``coeffs[1] == a_1``."""
        if not 1 <= n <= self.order:
            raise SeriesOrderError(f"a_{n} not available (order {self.order})")
        return self.coeffs[n - 1]


def _scalar_or_array(x: np.ndarray):
    return float(x) if np.ndim(x) == 0 else x


def _horner_odd(series: Sequence[float], u: np.ndarray) -> np.ndarray:
    odd = np.asarray(series[1::2], dtype=float)
    u2 = u * u
    acc = np.zeros_like(u, dtype=float)
    for c in odd[::-1]:
        acc = acc * u2 + c
    return acc * u


def _horner_odd_prime(series: Sequence[float], u: np.ndarray) -> np.ndarray:
    # d/du sum c_{2k+1} u^{2k+1} = sum (2k+1) c_{2k+1} u^{2k}
    odd = np.asarray(series[1::2], dtype=float)
    weighted = odd * (2 * np.arange(len(odd)) + 1)
    u2 = u * u
    acc = np.zeros_like(u, dtype=float)
    for c in weighted[::-1]:
        acc = acc * u2 + c
    return acc


def _check_tan_domain(u: np.ndarray) -> None:
    if np.any(np.abs(u) >= math.pi / 2):
        raise DomainError("|u| reaches the pole of tan at pi/2")


def eval_f(spec: DeformationSpec, u):
    """Deformation function f(u)."""
    u = np.asarray(u, dtype=float)
    if spec.kind is Kind.UNDEFORMED:
        return _scalar_or_array(u.copy())
    if spec.kind is Kind.KEMPF_TAN:
        _check_tan_domain(u)
        return _scalar_or_array(np.tan(u))
    if spec.closed_f is not None:
        return _scalar_or_array(np.asarray(spec.closed_f(u), dtype=float))
    return _scalar_or_array(_horner_odd(spec.f_series, u))


def eval_f_prime(spec: DeformationSpec, u):
    """Derivative f'(u)."""
    u = np.asarray(u, dtype=float)
    if spec.kind is Kind.UNDEFORMED:
        return _scalar_or_array(np.ones_like(u))
    if spec.kind is Kind.KEMPF_TAN:
        _check_tan_domain(u)
        return _scalar_or_array(1.0 / np.cos(u) ** 2)
    if spec.closed_f_prime is not None:
        return _scalar_or_array(np.asarray(spec.closed_f_prime(u), dtype=float))
    return _scalar_or_array(_horner_odd_prime(spec.f_series, u))


def inverse_f(spec: DeformationSpec, y: float, tol: float = 1e-15, maxiter: int = 200) -> float:
    """Solve f(u) = y for u on the admissible domain.

    Newton iteration safeguarded by bisection; f is strictly increasing, so
    the bracket [-u_max, u_max] always contains the root when y is in range.
    """
    if spec.kind is Kind.UNDEFORMED:
        return float(y)
    if spec.kind is Kind.KEMPF_TAN:
        return math.atan(y)
    umax = spec.sqrt_beta * spec.momentum_bound
    lo, hi = -umax, umax
    flo, fhi = eval_f(spec, lo) - y, eval_f(spec, hi) - y
    if flo > 0 or fhi < 0:
        raise DomainError(f"{y} outside the range of f")
    u = 0.0
    for _ in range(maxiter):
        fu = eval_f(spec, u) - y
        if abs(fu) <= tol * max(1.0, abs(y)):
            return u
        if fu > 0:
            hi = u
        else:
            lo = u
        d = eval_f_prime(spec, u)
        step = u - fu / d if d > 0 else lo - 1.0
        u = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(u)):
            return u
    raise InversionError(f"inverse of f did not converge for y={y}")


def eval_F(spec: DeformationSpec, P: float) -> float:
    """Commutator factor F(sqrt(beta) P) = f'(f^{-1}(sqrt(beta) P))."""
    if not spec.is_deformed:
        return 1.0
    return float(eval_f_prime(spec, inverse_f(spec, spec.sqrt_beta * P)))


def kinetic_energy(spec: DeformationSpec, p):
    """T(p, beta) = f(sqrt(beta) p)^2 / (2 m beta); p^2/2m at beta = 0."""
    p = np.asarray(p, dtype=float)
    spec.check_momentum(p)
    if not spec.is_deformed:
        return _scalar_or_array(p * p / (2 * spec.mass))
    sb = spec.sqrt_beta
    f = np.asarray(eval_f(spec, sb * p))
    return _scalar_or_array(f * f / (2 * spec.mass * spec.beta))


def kinetic_derivative(spec: DeformationSpec, p):
    """Group velocity dT/dp = f f' / (m sqrt(beta)); p/m at beta = 0."""
    p = np.asarray(p, dtype=float)
    spec.check_momentum(p)
    if not spec.is_deformed:
        return _scalar_or_array(p / spec.mass)
    sb = spec.sqrt_beta
    u = sb * p
    return _scalar_or_array(
        np.asarray(eval_f(spec, u)) * np.asarray(eval_f_prime(spec, u)) / (spec.mass * sb)
    )


def taylor_coeffs(spec: DeformationSpec, order: int) -> KineticCoefficients:
    """Kinetic-series coefficients from the Cauchy square of the f series."""
    if order < 1:
        raise SeriesOrderError("order must be >= 1")
    f = spec.series(2 * order - 1)
    # (f^2)_{2n} = sum_i f_i f_{2n-i}; only odd i contribute
    a = []
    for n in range(1, order + 1):
        k = 2 * n
        i = np.arange(1, k, 2)
        a.append(float(np.dot(f[i], f[k - i])))
    a[0] = 1.0
    return KineticCoefficients(tuple(a))


def diagonal_threshold(spec: DeformationSpec, p=None, q=None):
    """Default switchover distance for the divided-difference kernel."""
    if math.isfinite(spec.momentum_bound):
        return 1e-8 * max(1.0, spec.momentum_bound)
    scale = np.maximum(1.0, np.maximum(np.abs(np.asarray(p, float)), np.abs(np.asarray(q, float))))
    return 1e-8 * scale


def divided_difference_kernel(spec: DeformationSpec, p, q, eps=None):
    """(T(p) - T(q)) / (p - q), replaced by T' at the midpoint near the diagonal.

    Symmetric in (p, q) bit for bit.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if eps is None:
        eps = diagonal_threshold(spec, p, q)
    d = p - q
    near = np.abs(d) < eps
    safe_d = np.where(near, 1.0, d)
    quot = (np.asarray(kinetic_energy(spec, p)) - np.asarray(kinetic_energy(spec, q))) / safe_d
    # (p+q)/2 is symmetric; T' there is exact at p == q and O(d^2) close otherwise
    diag = np.asarray(kinetic_derivative(spec, 0.5 * (p + q)))
    return _scalar_or_array(np.where(near, diag, quot))


# -- JSON ---------------------------------------------------------------------

def load_spec(source, hbar: Optional[float] = None, mass: Optional[float] = None) -> DeformationSpec:
    """Read a user deformation from a JSON path or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = dict(source)
    coeffs = doc["f_odd_coeffs"]
    if not coeffs or coeffs[0] != 1:
        raise AdmissibilityError("f_odd_coeffs[0] must equal 1")
    return DeformationSpec.from_odd_coeffs(
        coeffs,
        beta=float(doc["beta"]),
        momentum_bound=float(doc["momentum_bound"]),
        hbar=float(hbar if hbar is not None else doc.get("hbar", 1.0)),
        mass=float(mass if mass is not None else doc.get("mass", 1.0)),
    )


def spec_to_json(spec: DeformationSpec) -> dict:
    bound = spec.momentum_bound
    return {
        "beta": spec.beta,
        "hbar": spec.hbar,
        "mass": spec.mass,
        "f_odd_coeffs": list(spec.f_series[1::2]),
        "momentum_bound": bound if math.isfinite(bound) else None,
    }
