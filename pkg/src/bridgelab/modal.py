"""Sine-basis representation of fields on [0, 1] with pinned ends.

A field of order N is u(x) = sum_n a_n sqrt(2) sin(n pi x).  The basis is
orthonormal in L2(0, 1) and diagonalises A = d^4/dx^4 (eigenvalue (n pi)^4),
so every fractional norm ||u||_r = ||A^{r/4} u|| is a weighted coefficient sum.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

LAMBDA1 = np.pi ** 4
SQRT_LAMBDA1 = np.pi ** 2
ALIAS_FACTOR = 16


def wavenumbers(order: int) -> np.ndarray:
    """n*pi for n = 1..order."""
    return np.pi * np.arange(1, order + 1, dtype=float)


@dataclass(frozen=True)
class ModalField:
    """Coefficients a_1..a_N of a field in the orthonormal sine basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        a = np.array(self.coeffs, dtype=float).ravel()
        if a.size < 1:
            raise ValueError("a ModalField needs order N >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("ModalField coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @property
    def order(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, order: int) -> "ModalField":
        return cls(np.zeros(order))

    @classmethod
    def mode(cls, n: int, order: int, amplitude: float = 1.0) -> "ModalField":
        """amplitude * e_n, with e_n = sqrt(2) sin(n pi x)."""
        if not 1 <= n <= order:
            raise ValueError(f"mode {n} outside 1..{order}")
        a = np.zeros(order)
        a[n - 1] = amplitude
        return cls(a)

    def resized(self, order: int) -> "ModalField":
        """Truncate or zero-pad to ``order``."""
        a = np.zeros(order)
        m = min(order, self.order)
        a[:m] = self.coeffs[:m]
        return ModalField(a)

    def __add__(self, other):
        return ModalField(self.coeffs + _coeffs_of(other))

    def __sub__(self, other):
        return ModalField(self.coeffs - _coeffs_of(other))

    def __neg__(self):
        return ModalField(-self.coeffs)

    def __mul__(self, s):
        return ModalField(self.coeffs * float(s))

    __rmul__ = __mul__

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        return {"order": self.order, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_dict(cls, d: dict) -> "ModalField":
        coeffs = d["coeffs"]
        if "order" in d and int(d["order"]) != len(coeffs):
            raise ValueError(f"order {d['order']} does not match {len(coeffs)} coefficients")
        return cls(np.asarray(coeffs, dtype=float))

    @classmethod
    def from_json(cls, s: str) -> "ModalField":
        return cls.from_dict(json.loads(s))


def _coeffs_of(x):
    if isinstance(x, ModalField):
        return x.coeffs
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class State:
    """Phase-space point z = (u, v): position and velocity fields of the same order."""

    position: ModalField
    velocity: ModalField

    def __post_init__(self):
        if self.position.order != self.velocity.order:
            raise ValueError(
                f"position order {self.position.order} != velocity order {self.velocity.order}")

    @property
    def order(self) -> int:
        return self.position.order

    @classmethod
    def zeros(cls, order: int) -> "State":
        return cls(ModalField.zeros(order), ModalField.zeros(order))

    @classmethod
    def from_arrays(cls, u, v) -> "State":
        return cls(ModalField(u), ModalField(v))

    def phase_norm(self) -> float:
        """sqrt(||u||_2^2 + ||v||^2), the norm of the energy space."""
        return float(np.sqrt(sobolev_norm_sq(self.position, 2) + sobolev_norm_sq(self.velocity, 0)))

    def to_dict(self) -> dict:
        return {"position": self.position.to_dict(), "velocity": self.velocity.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "State":
        return cls(ModalField.from_dict(d["position"]), ModalField.from_dict(d["velocity"]))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Composite Simpson rule on M uniform intervals of [0, 1] (M even)."""

    intervals: int
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    _basis_cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        m = int(self.intervals)
        if m < 2 or m % 2:
            raise ValueError(f"Simpson rule needs an even number of intervals >= 2, got {m}")
        x = np.linspace(0.0, 1.0, m + 1)
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= 1.0 / (3.0 * m)
        for arr in (x, w):
            arr.setflags(write=False)
        object.__setattr__(self, "intervals", m)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def for_order(cls, order: int, factor: int = ALIAS_FACTOR) -> "QuadratureGrid":
        return cls(factor * order)

    def check_order(self, order: int):
        if self.intervals < ALIAS_FACTOR * order:
            raise ValueError(
                f"quadrature grid with M={self.intervals} intervals is too coarse for order "
                f"N={order}; need M >= {ALIAS_FACTOR * order}")

    def basis(self, order: int) -> np.ndarray:
        """(M+1, N) matrix of sqrt(2) sin(n pi x_j)."""
        b = self._basis_cache.get(order)
        if b is None:
            b = np.sqrt(2.0) * np.sin(np.outer(self.nodes, wavenumbers(order)))
            # sin(n pi) is not exactly zero in floating point
            b[0, :] = 0.0
            b[-1, :] = 0.0
            b.setflags(write=False)
            self._basis_cache[order] = b
        return b

    def weighted_basis(self, order: int) -> np.ndarray:
        """weights[:, None] * basis(order), the projection operator transposed."""
        key = ("w", order)
        wb = self._basis_cache.get(key)
        if wb is None:
            wb = self.weights[:, None] * self.basis(order)
            wb.setflags(write=False)
            self._basis_cache[key] = wb
        return wb

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def sobolev_norm_sq(field: ModalField, r: float) -> float:
    """||u||_r^2 = sum_n (n pi)^(2r) a_n^2."""
    a = field.coeffs
    return float(np.sum(wavenumbers(a.size) ** (2.0 * r) * a * a))


def evaluate(field: ModalField, points) -> np.ndarray:
    """Point values u(x_j); raises ValueError for points outside [0, 1]."""
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("evaluation points must lie in [0, 1]")
    vals = np.sqrt(2.0) * np.sin(np.outer(x, wavenumbers(field.order))) @ field.coeffs
    return vals


def project(source: Union[Callable, Sequence[float], np.ndarray], grid: QuadratureGrid,
            order: int) -> ModalField:
    """Galerkin projection onto span{e_1..e_N} by quadrature.

    ``source`` is either a callable on [0, 1] or the M+1 samples on grid.nodes.
    """
    grid.check_order(order)
    if callable(source):
        samples = _sample_callable(source, grid.nodes)
    else:
        samples = np.asarray(source, dtype=float)
        if samples.shape != grid.nodes.shape:
            raise ValueError(f"expected {grid.nodes.size} samples, got shape {samples.shape}")
    return ModalField(grid.weighted_basis(order).T @ samples)


def _sample_callable(fn, x):
    try:
        y = np.asarray(fn(x), dtype=float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(xi)) for xi in x])


def positive_part_values(field: ModalField, grid: QuadratureGrid) -> np.ndarray:
    """max(u(x_j), 0) on the grid nodes."""
    return np.maximum(grid.basis(field.order) @ field.coeffs, 0.0)


def positive_part(field: ModalField, grid: QuadratureGrid) -> ModalField:
    """Projection of x -> max(u(x), 0) onto the first N modes."""
    return project(positive_part_values(field, grid), grid, field.order)


def positive_part_sq(field: ModalField, grid: QuadratureGrid) -> float:
    """||u+||^2 by the grid rule (the cable potential uses this exact quantity)."""
    up = positive_part_values(field, grid)
    return grid.integrate(up * up)


def fp_pairing(field: ModalField, p: float) -> float:
    """<A u - p A^{1/2} u, u> = sum_n ((n pi)^4 - p (n pi)^2) a_n^2."""
    mu = wavenumbers(field.order) ** 2
    a = field.coeffs
    return float(np.sum((mu * mu - p * mu) * a * a))


def coercivity_constant(p: float) -> float:
    """Lower constant C(p) in <A u - p A^{1/2} u, u> >= C(p) ||u||_2^2, for p < pi^2."""
    if p >= SQRT_LAMBDA1:
        raise ValueError(f"no coercivity constant for p = {p} >= pi^2")
    if p <= 0:
        return 1.0
    return 1.0 - p / SQRT_LAMBDA1
