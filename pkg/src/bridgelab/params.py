"""Physical and numerical parameters of the bridge model."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .modal import ALIAS_FACTOR, ModalField, QuadratureGrid

PI2 = np.pi ** 2


@dataclass(frozen=True)
class Sinusoid:
    """g(t) = amplitude * sin(omega t + phase)."""

    amplitude: float = 1.0
    omega: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t, dtype=float) + self.phase)

    @property
    def sup(self) -> float:
        return abs(self.amplitude)

    def to_dict(self):
        return {"kind": "sin", "amplitude": self.amplitude, "omega": self.omega, "phase": self.phase}


@dataclass(frozen=True)
class ForcingSpec:
    """f(t) = f0 + g(t) f1.

    ``modulation_sup`` bounds |g|; a :class:`Sinusoid` supplies it itself.
    Other callables must pass it explicitly.
    """

    static: Optional[ModalField] = None
    modulation: Optional[Callable] = None
    modulated: Optional[ModalField] = None
    modulation_sup: Optional[float] = None

    def __post_init__(self):
        if (self.modulation is None) != (self.modulated is None):
            raise ValueError("modulation and modulated field must be given together")
        if self.modulation is not None and self.modulation_sup is None:
            sup = getattr(self.modulation, "sup", None)
            if sup is None:
                raise ValueError("a custom modulation g(t) needs modulation_sup = sup |g|")
            object.__setattr__(self, "modulation_sup", float(sup))

    @property
    def autonomous(self) -> bool:
        return self.modulation is None or not np.any(self.modulated.coeffs)

    def static_coeffs(self, order: int) -> np.ndarray:
        return np.zeros(order) if self.static is None else self.static.resized(order).coeffs

    def modulated_coeffs(self, order: int) -> np.ndarray:
        return np.zeros(order) if self.modulated is None else self.modulated.resized(order).coeffs

    def g(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.modulation is None:
            return np.zeros_like(t)
        vals = self.modulation(t)
        vals = np.asarray(vals, dtype=float)
        if vals.shape != t.shape:
            vals = np.array([float(self.modulation(ti)) for ti in t.ravel()]).reshape(t.shape)
        return vals

    def at(self, t: float, order: int) -> np.ndarray:
        """Modal coefficients of f(t)."""
        f = self.static_coeffs(order)
        if self.modulation is not None:
            f = f + float(self.g(t)) * self.modulated_coeffs(order)
        return f

    def sup_norm(self, order: int) -> float:
        """||f0|| + sup|g| ||f1||, a bound for sup_t ||f(t)||."""
        s = float(np.linalg.norm(self.static_coeffs(order)))
        if self.modulation is not None:
            s += self.modulation_sup * float(np.linalg.norm(self.modulated_coeffs(order)))
        return s

    def to_dict(self):
        d = {"static": None if self.static is None else self.static.to_dict()}
        if self.modulation is not None:
            mod = self.modulation.to_dict() if hasattr(self.modulation, "to_dict") else repr(self.modulation)
            d.update(modulation=mod, modulated=self.modulated.to_dict(),
                     modulation_sup=self.modulation_sup)
        return d


@dataclass(frozen=True, eq=False)
class BridgeParams:
    """Axial load p, cable stiffness k (enters as k^2), forcing, truncation N, quadrature M."""

    p: float = 0.0
    k: float = 0.0
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    N: int = 16
    M: Optional[int] = None
    damping: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.M is None:
            object.__setattr__(self, "M", ALIAS_FACTOR * self.N)
        if self.M < ALIAS_FACTOR * self.N:
            raise ValueError(f"M = {self.M} violates the aliasing guard M >= {ALIAS_FACTOR} N")
        if self.k < 0:
            raise ValueError("cable stiffness k must be >= 0")
        if not self.damping > 0:
            raise ValueError("damping must be > 0")
        object.__setattr__(self, "_grid", QuadratureGrid(self.M))

    @classmethod
    def from_bk(cls, b: float, kappa: float, **kw) -> "BridgeParams":
        """p = b pi^2, k = |kappa| pi^2."""
        return cls(p=b * PI2, k=abs(kappa) * PI2, **kw)

    @property
    def b(self) -> float:
        return self.p / PI2

    @property
    def kappa(self) -> float:
        return self.k / PI2

    @property
    def grid(self) -> QuadratureGrid:
        return self._grid

    def with_(self, **changes) -> "BridgeParams":
        return replace(self, **changes)

    def to_dict(self):
        return {"p": self.p, "k": self.k, "N": self.N, "M": self.M, "damping": self.damping,
                "forcing": self.forcing.to_dict()}
