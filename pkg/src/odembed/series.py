"""Truncated formal power series with exact coefficient arithmetic.

A series of truncation order N stores coefficients gamma_0 .. gamma_N of
x^0 .. x^N. Arithmetic truncates to the smaller operand order; composition
requires the inner series to have zero constant term so that the result is
again determined by finitely many input coefficients.
"""

from dataclasses import dataclass

from .errors import PreconditionError


@dataclass(frozen=True)
class PowerSeries:
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) == 0:
            raise PreconditionError("a series needs at least the constant coefficient")

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    def coeff(self, i: int) -> float:
        return self.coeffs[i] if i <= self.N else 0.0

    def truncate(self, order: int) -> "PowerSeries":
        if order >= self.N:
            return self.pad(order)
        return PowerSeries(self.coeffs[:order + 1])

    def pad(self, order: int) -> "PowerSeries":
        if order <= self.N:
            return self
        return PowerSeries(self.coeffs + (0.0,) * (order - self.N))

    def add(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.N, other.N)
        return PowerSeries(tuple(self.coeff(i) + other.coeff(i) for i in range(n + 1)))

    def sub(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.N, other.N)
        return PowerSeries(tuple(self.coeff(i) - other.coeff(i) for i in range(n + 1)))

    def scale(self, a: float) -> "PowerSeries":
        return PowerSeries(tuple(a * c for c in self.coeffs))

    def mul(self, other: "PowerSeries", order: int | None = None) -> "PowerSeries":
        n = min(self.N, other.N) if order is None else order
        out = [0.0] * (n + 1)
        for i, ci in enumerate(self.coeffs):
            if i > n:
                break
            if ci == 0.0:
                continue
            for j, cj in enumerate(other.coeffs):
                if i + j > n:
                    break
                out[i + j] += ci * cj
        return PowerSeries(tuple(out))

    def compose(self, inner: "PowerSeries", order: int | None = None) -> "PowerSeries":
        """self(inner(x)) truncated; the inner constant term must vanish."""
        if inner.coeff(0) != 0.0:
            raise PreconditionError("composition requires inner constant term 0")
        n = min(self.N, inner.N) if order is None else order
        result = PowerSeries((0.0,) * (n + 1))
        # Horner evaluation in the series ring
        for c in reversed(self.coeffs):
            result = result.mul(inner.pad(n), order=n)
            result = result.add(PowerSeries((c,) + (0.0,) * n))
        return result

    def derive(self) -> "PowerSeries":
        if self.N == 0:
            return PowerSeries((0.0,))
        return PowerSeries(tuple((i + 1) * c for i, c in enumerate(self.coeffs[1:])))

    def __call__(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def max_abs_coeff(self, up_to: int | None = None) -> float:
        hi = self.N if up_to is None else min(up_to, self.N)
        return max(abs(c) for c in self.coeffs[:hi + 1])

    def to_dict(self) -> dict:
        return {"N": self.N, "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerSeries":
        s = cls(tuple(d["coeffs"]))
        if int(d.get("N", s.N)) != s.N:
            raise PreconditionError("declared order does not match coefficient count")
        return s

    @classmethod
    def from_coeffs(cls, coeffs, order: int | None = None) -> "PowerSeries":
        s = cls(tuple(coeffs))
        return s if order is None else s.pad(order).truncate(order)


def monomial(power: int, order: int, coefficient: float = 1.0) -> PowerSeries:
    """The series coefficient * x^power at truncation order ``order``."""
    if power > order:
        raise PreconditionError("monomial power exceeds the truncation order")
    coeffs = [0.0] * (order + 1)
    coeffs[power] = coefficient
    return PowerSeries(tuple(coeffs))
