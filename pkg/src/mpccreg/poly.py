"""Sparse multivariate polynomials with exact derivatives.

Terms are kept in canonical form: one coefficient per exponent vector,
no zero coefficients, sorted by exponent tuple.  Derivatives are again
polynomials, so gradients and Hessians carry no differentiation error.
"""

from __future__ import annotations

from functools import cached_property
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np


class Poly:
    """Immutable polynomial in ``nvars`` real variables.

    Parameters
    ----------
    nvars : int
        Number of variables.
    terms : mapping or iterable
        Either ``{exponents: coef}`` or an iterable of ``(coef, exponents)``
        pairs.  Repeated exponent vectors are merged and zero coefficients
        dropped.
    """

    def __init__(self, nvars: int, terms: Mapping | Iterable = ()):
        if int(nvars) != nvars or nvars < 1:
            raise ValueError(f"nvars must be a positive integer, got {nvars!r}")
        nvars = int(nvars)
        if isinstance(terms, Mapping):
            items = [(c, e) for e, c in terms.items()]
        else:
            items = list(terms)
        acc: dict[tuple[int, ...], float] = {}
        for coef, exps in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ValueError(
                    f"exponent vector {exps} has length {len(exps)}, expected {nvars}"
                )
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            acc[exps] = acc.get(exps, 0.0) + float(coef)
        self.nvars = nvars
        self._terms = tuple(sorted((e, c) for e, c in acc.items() if c != 0.0))

    # -- construction helpers ------------------------------------------------

    @classmethod
    def const(cls, value: float, nvars: int) -> "Poly":
        return cls(nvars, [(value, (0,) * nvars)])

    @classmethod
    def var(cls, index: int, nvars: int) -> "Poly":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for {nvars} variables")
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, [(1.0, exps)])

    @classmethod
    def variables(cls, nvars: int) -> tuple["Poly", ...]:
        return tuple(cls.var(i, nvars) for i in range(nvars))

    @classmethod
    def from_json(cls, data: Sequence, nvars: int | None = None) -> "Poly":
        """Parse the ``[[coef, [e1, ..., en]], ...]`` wire format."""
        data = list(data)
        if nvars is None:
            if not data:
                raise ValueError("cannot infer nvars from an empty term list")
            nvars = len(data[0][1])
        pairs = []
        for item in data:
            if len(item) != 2:
                raise ValueError(f"malformed term {item!r}")
            coef, exps = item
            if not isinstance(coef, Real) or isinstance(coef, bool):
                raise ValueError(f"coefficient must be a real number, got {coef!r}")
            pairs.append((coef, exps))
        return cls(nvars, pairs)

    def to_json(self) -> list:
        return [[c, list(e)] for e, c in self._terms]

    # -- basic protocol --------------------------------------------------------

    @property
    def terms(self) -> tuple[tuple[tuple[int, ...], float], ...]:
        return self._terms

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self._terms == other._terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.nvars, self._terms))

    def __repr__(self) -> str:
        if not self._terms:
            return f"Poly({self.nvars}, 0)"
        parts = []
        for e, c in self._terms:
            mono = "*".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}" for i, k in enumerate(e) if k
            )
            parts.append(f"{c:g}*{mono}" if mono else f"{c:g}")
        return f"Poly({self.nvars}, {' + '.join(parts)})"

    # -- arithmetic -----------------------------------------------------------

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, Real):
            return Poly.const(float(other), self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Poly(self.nvars, [(c, e) for e, c in self._terms + other._terms])

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, [(-c, e) for e, c in self._terms])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        prod = []
        for e1, c1 in self._terms:
            for e2, c2 in other._terms:
                prod.append((c1 * c2, tuple(a + b for a, b in zip(e1, e2))))
        return Poly(self.nvars, prod)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = Poly.const(1.0, self.nvars)
        for _ in range(int(k)):
            out = out * self
        return out

    # -- evaluation -----------------------------------------------------------

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._terms:
            return np.zeros((0, self.nvars), dtype=np.int64), np.zeros(0)
        exps = np.array([e for e, _ in self._terms], dtype=np.int64)
        coefs = np.array([c for _, c in self._terms])
        return exps, coefs

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise ValueError(
                f"point has shape {x.shape}, expected ({self.nvars},)"
            )
        return x

    def __call__(self, x) -> float:
        x = self._check_point(x)
        exps, coefs = self._arrays
        if coefs.size == 0:
            return 0.0
        return float(coefs @ np.prod(x ** exps, axis=1))

    eval = __call__

    # -- differentiation ------------------------------------------------------

    def diff(self, i: int) -> "Poly":
        """Exact partial derivative with respect to variable ``i``."""
        out = []
        for e, c in self._terms:
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out.append((c * e[i], e2))
        return Poly(self.nvars, out)

    @cached_property
    def gradient(self) -> tuple["Poly", ...]:
        return tuple(self.diff(i) for i in range(self.nvars))

    @cached_property
    def hessian(self) -> tuple[tuple["Poly", ...], ...]:
        # Upper triangle computed once and mirrored so the result is
        # term-identical across the diagonal.
        n = self.nvars
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            gi = self.gradient[i]
            for j in range(i, n):
                rows[i][j] = rows[j][i] = gi.diff(j)
        return tuple(tuple(r) for r in rows)

    def grad_at(self, x) -> np.ndarray:
        x = self._check_point(x)
        return np.array([g(x) for g in self.gradient])

    def hess_at(self, x) -> np.ndarray:
        x = self._check_point(x)
        n = self.nvars
        H = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                H[i, j] = H[j, i] = self.hessian[i][j](x)
        return H
