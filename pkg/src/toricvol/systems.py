"""Sparse polynomial systems: validation, Gaussian sampling, evaluation, condition matrix.

Coefficients are stored in the orthonormal frame ``f C^{-1/2}``, where the
sampling distribution is i.i.d. standard Gaussian and evaluation is the
plain pairing with ``C^{1/2} exp(A z)``.  Complex coefficients have real and
imaginary parts of unit variance each, so a monomial coefficient has
``Var(Re) = Var(Im) = C_aa``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SupportError
from .montecarlo import rng_for
from .supports import SupportSpec, kostlan_support, linear_support
from .toric import ToricPoint, as_point, kahler_eval

FIELDS = ("complex", "real")


@dataclass(frozen=True)
class SystemSpec:
    polys: tuple
    field: str = "complex"

    def __post_init__(self):
        polys = tuple(self.polys)
        object.__setattr__(self, "polys", polys)
        if self.field not in FIELDS:
            raise SupportError(f"field must be one of {FIELDS}, got {self.field!r}")
        if not polys:
            raise SupportError("a system needs at least one polynomial")
        n = len(polys)
        for i, s in enumerate(polys):
            if s.n != n:
                raise SupportError(
                    f"polynomial {i} lives in {s.n} variables but the system has {n} equations")
            if not s.is_full_dimensional:
                raise SupportError(f"support {i} is not full-dimensional (dim Conv(A) < n)")

    @property
    def n(self) -> int:
        return len(self.polys)

    @property
    def is_real(self) -> bool:
        return self.field == "real"

    @property
    def is_unmixed(self) -> bool:
        return all(s.same_as(self.polys[0]) for s in self.polys[1:])

    @property
    def is_linear(self) -> bool:
        rows = {tuple(r) for r in linear_support(self.n).exponents.tolist()}
        return all(s.size == len(rows) and {tuple(r) for r in s.exponents.tolist()} == rows
                   for s in self.polys)

    def with_field(self, field: str) -> "SystemSpec":
        return SystemSpec(self.polys, field)

    @classmethod
    def from_json(cls, obj) -> "SystemSpec":
        if isinstance(obj, list):
            obj = {"polynomials": obj}
        if "polynomials" not in obj:
            raise SupportError("system JSON needs a 'polynomials' list")
        return cls(tuple(SupportSpec.from_json(p) for p in obj["polynomials"]),
                   obj.get("field", "complex"))

    @classmethod
    def load(cls, path) -> "SystemSpec":
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        return {"field": self.field, "polynomials": [p.to_json() for p in self.polys]}


def linear_system(n: int, field: str = "complex") -> SystemSpec:
    return SystemSpec(tuple(linear_support(n) for _ in range(n)), field)


def unmixed_system(spec: SupportSpec, field: str = "complex") -> SystemSpec:
    return SystemSpec(tuple(spec for _ in range(spec.n)), field)


def kostlan_system(n: int, degrees: Sequence[int], field: str = "complex") -> SystemSpec:
    if len(degrees) != n:
        raise SupportError("need one degree per equation")
    return SystemSpec(tuple(kostlan_support(n, d) for d in degrees), field)


@dataclass(frozen=True)
class PolySample:
    """Coefficients ``f^i`` (orthonormal frame) of one system drawn from ``spec``."""

    coeffs: tuple
    spec: SystemSpec

    def __post_init__(self):
        coeffs = tuple(np.asarray(c) for c in self.coeffs)
        if len(coeffs) != self.spec.n:
            raise SupportError("one coefficient vector per polynomial required")
        for c, s in zip(coeffs, self.spec.polys):
            if c.shape != (s.size,):
                raise SupportError(f"coefficient count {c.shape} does not match {s.size} support rows")
        object.__setattr__(self, "coeffs", coeffs)

    def monomial_coeffs(self) -> list[np.ndarray]:
        return [c * np.sqrt(s.variances) for c, s in zip(self.coeffs, self.spec.polys)]

    @classmethod
    def from_monomial(cls, spec: SystemSpec, coeffs) -> "PolySample":
        dtype = float if spec.is_real else complex
        return cls(tuple(np.asarray(c, dtype=dtype) / np.sqrt(s.variances)
                         for c, s in zip(coeffs, spec.polys)), spec)

    def normalized(self) -> "PolySample":
        """Each ``f^i`` scaled to unit norm (roots are unchanged)."""
        return PolySample(tuple(c / np.linalg.norm(c) for c in self.coeffs), self.spec)

    def negated(self) -> "PolySample":
        return PolySample(tuple(-c for c in self.coeffs), self.spec)

    def to_json(self, basis: str = "monomial") -> dict:
        coeffs = self.monomial_coeffs() if basis == "monomial" else self.coeffs
        return {"basis": basis,
                "coeffs": [[[float(np.real(x)), float(np.imag(x))] for x in c] for c in coeffs]}

    @classmethod
    def from_json(cls, spec: SystemSpec, obj) -> "PolySample":
        if isinstance(obj, list):
            obj = {"coeffs": obj}
        basis = obj.get("basis", "monomial")
        parsed = []
        for c in obj["coeffs"]:
            arr = np.array([complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)
                            for x in c])
            parsed.append(arr.real.copy() if spec.is_real and np.all(arr.imag == 0) else arr)
        if basis == "monomial":
            return cls.from_monomial(spec, parsed)
        if basis == "orthonormal":
            return cls(tuple(parsed), spec)
        raise SupportError(f"unknown coefficient basis {basis!r}")


def sample_coeffs(spec: SystemSpec, rng: np.random.Generator, size: int) -> list[np.ndarray]:
    """``size`` i.i.d. systems as per-polynomial arrays of shape ``(size, M_i)``."""
    out = []
    for s in spec.polys:
        if spec.is_real:
            out.append(rng.standard_normal((size, s.size)))
        else:
            out.append(rng.standard_normal((size, s.size)) + 1j * rng.standard_normal((size, s.size)))
    return out


def sample(spec: SystemSpec, rng_seed: int, stream: int = 0) -> PolySample:
    """One Gaussian system; identical output for identical ``(rng_seed, stream)``."""
    rng = rng_for(rng_seed, stream)
    return PolySample(tuple(c[0] for c in sample_coeffs(spec, rng, 1)), spec)


def evaluate(f: PolySample, at, scaled: bool = False):
    """``f^i . vhat_{A_i}(p + i q)`` for each ``i``.

    With ``scaled=True`` returns ``(f^i . v_{A_i}, g_{A_i}(p))`` so that the
    value is ``scaled * exp(g)`` without overflow.
    """
    at = as_point(at)
    vals, logs = [], []
    for c, s in zip(f.coeffs, f.spec.polys):
        ev = kahler_eval(s, at)
        vals.append(c @ ev.v)
        logs.append(ev.g)
    vals = np.array(vals, dtype=complex)
    logs = np.array(logs)
    if scaled:
        return vals, logs
    return vals * np.exp(logs)


@dataclass(frozen=True)
class ConditionMatrix:
    D: np.ndarray
    at: ToricPoint


def condition_matrix(f: PolySample, at) -> ConditionMatrix:
    """Rows ``f^i . Dv_{A_i}(p, q)``."""
    at = as_point(at)
    rows = [c @ kahler_eval(s, at).dv for c, s in zip(f.coeffs, f.spec.polys)]
    return ConditionMatrix(np.array(rows, dtype=complex), at)


def metrics_at(spec: SystemSpec, at) -> list[np.ndarray]:
    """``1/2 D^2 g_{A_i}`` for every polynomial of the system."""
    at = as_point(at)
    return [kahler_eval(s, at).metric for s in spec.polys]
