"""Suspension dynamics on the mapping torus of an invertible map.

The torus glues (map(x), 0) to (x, T); the suspension flow moves at unit
speed in the fiber and applies the map at each crossing. All quotient
bookkeeping is exact: the winding count is an integer computed by one
floor division and the fiber residual by one subtraction, never by
repeated float subtraction, so many windings accumulate no error. Since
the fiber field is constant, iterating the map replaces integration.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .expr import FuncSpec, Grid

_INVERSE_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class TorusPoint:
    """Canonical quotient coordinate: base point, fiber time r in [0, T),
    and the cumulative winding count of identifications applied."""

    x: np.ndarray
    r: float
    k: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))


@dataclass(frozen=True)
class MappingTorus:
    """The quotient of R^n x [0, T] by the gluing (map(x), 0) ~ (x, T)."""

    phi: FuncSpec
    T: float
    phi_inverse: FuncSpec | None = None
    check_grid: Grid | None = None

    def __post_init__(self):
        if self.phi.n_in != self.phi.n_out:
            raise PreconditionError("the glued map must have equal input/output dimension")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise PreconditionError("fiber length T must be positive and finite")
        if self.phi_inverse is not None:
            if self.phi_inverse.n_in != self.phi.n_in or self.phi_inverse.n_out != self.phi.n_in:
                raise PreconditionError("inverse dimensions do not match the map")
            grid = self.check_grid
            if grid is None and all(d.finite for d in self.phi.domain.dims):
                grid = Grid(self.phi.domain, (5,) * self.phi.n_in)
            if grid is not None:
                from .errors import DomainError
                for p in grid.points():
                    try:
                        back = self.phi_inverse.eval(self.phi.eval(p))
                    except DomainError:
                        continue  # image left the declared window; not a failure
                    if float(np.max(np.abs(back - p))) > _INVERSE_CHECK_TOL:
                        raise PreconditionError(
                            f"supplied inverse fails round-trip at {p.tolist()}")

    @property
    def n(self) -> int:
        return self.phi.n_in

    def iterate(self, x, n: int) -> np.ndarray:
        """map^n(x) by n exact compositions (negative n uses the inverse)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if n >= 0:
            for _ in range(n):
                x = self.phi.eval(x)
            return x
        if self.phi_inverse is None:
            raise PreconditionError("negative winding requires the inverse map")
        for _ in range(-n):
            x = self.phi_inverse.eval(x)
        return x


def canonicalize(torus: MappingTorus, x, t: float) -> TorusPoint:
    """Canonical representative of (x, t): apply the gluing floor(t/T) times.

    t = n T + r with r in [0, T); the winding n comes from one integer
    floor division and r from one subtraction.
    """
    T = torus.T
    n = math.floor(t / T)
    r = t - n * T
    if r >= T:  # defend against rounding when t/T sits just below an integer
        n += 1
        r = t - n * T
    if r < 0.0:
        n -= 1
        r = t - n * T
    return TorusPoint(torus.iterate(x, n), r, n)


def suspension_flow(torus: MappingTorus, start: TorusPoint, s: float) -> TorusPoint:
    """Flow for duration s: unit fiber speed plus exact identifications.

    Windings accumulate on top of the start's count; flowing by exactly
    k T from (x, 0) lands on (map^k(x), 0).
    """
    moved = canonicalize(torus, start.x, start.r + s)
    return TorusPoint(moved.x, moved.r, start.k + moved.k)


def automorphism(torus: MappingTorus, n: int, x, t: float) -> tuple:
    """Deck transformation of the covering: (x, t) -> (map^n(x), t - n T).

    Commutes with canonicalization, which is the defining quotient property.
    """
    if not isinstance(n, int):
        raise PreconditionError("the deck transformation index must be an integer")
    return torus.iterate(x, n), t - n * torus.T


def torus_trajectory_csv(torus: MappingTorus, start: TorusPoint, s: float,
                         samples: int) -> str:
    """Sample the flow at ``samples + 1`` evenly spaced durations in [0, s]."""
    if samples < 1:
        raise PreconditionError("need at least one sample interval")
    lines = ["s,k,r," + ",".join(f"x{i + 1}" for i in range(torus.n))]
    for i in range(samples + 1):
        si = s * i / samples
        p = suspension_flow(torus, start, si)
        lines.append(f"{si:.17g},{p.k},{p.r:.17g}," +
                     ",".join(f"{v:.17g}" for v in p.x))
    return "\n".join(lines) + "\n"
