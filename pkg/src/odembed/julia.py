"""Functional-equation machinery for the restricted embedding problem.

A candidate field f whose time-T map is a given map Phi must satisfy
Julia's functional equation J_Phi(x) f(x) = f(Phi(x)); differentiable Abel
solutions r(Phi(x)) = r(x) + c generate such fields via f = 1/r'. For a
nonvanishing 1-D field the flow has the closed form r^(-1)(r(x) + t) with
r' = 1/f, evaluated here by adaptive quadrature plus bracketed root finding.
Near-identity formal series x + b_m x^m + ... admit a power-series solution
(the iterative logarithm) computed by sequential coefficient matching, while
monomials c x^alpha admit none: the order-by-order elimination is returned
as an explicit certificate.
"""

import bisect
import math
from dataclasses import dataclass, field as _dcfield

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, PreconditionError
from .expr import FuncSpec, Grid, diff, jacobian
from .series import PowerSeries, monomial

__all__ = [
    "ResidualReport", "julia_residual", "abel_residual", "RFunction",
    "jabotinsky_flow", "iterative_logarithm", "julia_series_residual",
    "MonomialCertificate", "monomial_series_solution",
    "PrincipalSolutionResult", "principal_solution_limit",
]


@dataclass
class ResidualReport:
    max: float
    argmax: np.ndarray | None
    per_point: list  # (point, residual)
    escapes: list = _dcfield(default_factory=list)  # (point, message)

    def per_point_csv(self) -> str:
        if not self.per_point:
            return "residual\n"
        n = len(self.per_point[0][0])
        lines = [",".join(f"x{i + 1}" for i in range(n)) + ",residual"]
        for point, r in self.per_point:
            lines.append(",".join(f"{v:.17g}" for v in point) + f",{r:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "max": self.max,
            "argmax": None if self.argmax is None else [float(v) for v in self.argmax],
            "per_point_csv": self.per_point_csv(),
            "escapes": [[list(map(float, p)), m] for p, m in self.escapes],
        }


def julia_residual(f: FuncSpec, phi: FuncSpec, grid: Grid) -> ResidualReport:
    """Max-norm residual of J_Phi(x) f(x) = f(Phi(x)) over the grid.

    Grid points whose image Phi(x) escapes the domain of f are skipped and
    reported individually.
    """
    n = phi.n_in
    if phi.n_out != n or f.n_in != n or f.n_out != n:
        raise PreconditionError("julia residual needs square maps of equal dimension")
    jac = jacobian(phi)
    worst = 0.0
    argmax = None
    per_point = []
    escapes = []
    for x in grid.points():
        J = jac.eval(x).reshape(n, n)
        fx = f.eval(x)
        image = phi.eval(x)
        try:
            f_image = f.eval(image)
        except DomainError as err:
            escapes.append((x, f"Phi(x) = {image.tolist()} escapes: {err}"))
            continue
        r = float(np.max(np.abs(J @ fx - f_image)))
        per_point.append((x, r))
        if r >= worst:
            worst, argmax = r, x
    return ResidualReport(worst, argmax, per_point, escapes)


def abel_residual(r: FuncSpec, phi: FuncSpec, c: float, grid: Grid) -> ResidualReport:
    """Max residual of r(Phi(x)) = r(x) + c over the grid (1-D scalar r)."""
    if r.n_in != 1 or r.n_out != 1 or phi.n_in != 1 or phi.n_out != 1:
        raise PreconditionError("the Abel residual is implemented for 1-D maps")
    worst = 0.0
    argmax = None
    per_point = []
    escapes = []
    for x in grid.points():
        image = phi.eval(x)
        try:
            lhs = r.eval(image)[0]
        except DomainError as err:
            escapes.append((x, f"Phi(x) = {image.tolist()} escapes: {err}"))
            continue
        res = abs(lhs - r.eval(x)[0] - c)
        per_point.append((x, res))
        if res >= worst:
            worst, argmax = res, x
    return ResidualReport(worst, argmax, per_point, escapes)


class RFunction:
    """Antiderivative r of 1/f for a nonvanishing 1-D field f, with inverse.

    r(x) is computed by adaptive quadrature from an anchor point and cached
    cumulatively, since one flow evaluation needs r once per inversion
    bracket probe. f must have constant sign on the working interval
    (checked on a scan grid); r is then strictly monotone, so the inverse
    is found by geometric bracket expansion followed by a bracketed solver.

    Parameters
    ----------
    f : FuncSpec
        1-D scalar field; must not vanish on the interval.
    lo, hi : float, optional
        Working interval; defaults to the (finite) domain of f.
    anchor : float, optional
        Point with r(anchor) = 0; defaults to the interval midpoint.
    """

    def __init__(self, f: FuncSpec, lo: float | None = None, hi: float | None = None,
                 anchor: float | None = None, scan_count: int = 129,
                 quad_tol: float = 1e-12):
        if f.n_in != 1 or f.n_out != 1:
            raise PreconditionError("RFunction needs a 1-D scalar field")
        dim = f.domain.dims[0]
        self.f = f
        self.lo = dim.lo if lo is None else float(lo)
        self.hi = dim.hi if hi is None else float(hi)
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise PreconditionError("RFunction needs a finite working interval")
        self.quad_tol = quad_tol
        span = self.hi - self.lo
        self._inward = 1e-12 * span
        xs = np.linspace(self.lo + self._inward, self.hi - self._inward, scan_count)
        values = np.array([f.eval([x])[0] for x in xs])
        if np.any(values == 0.0) or (values.max() > 0 and values.min() < 0):
            k = int(np.argmin(np.abs(values)))
            raise PreconditionError(
                f"f must be nonvanishing with constant sign on [{self.lo}, {self.hi}]; "
                f"near-zero value {values[k]:.3g} at x = {xs[k]:.6g}")
        self.sign = 1.0 if values[0] > 0 else -1.0
        self.anchor = 0.5 * (self.lo + self.hi) if anchor is None else float(anchor)
        self._xs = [self.anchor]   # cached nodes, sorted
        self._rs = [0.0]           # r at the cached nodes

    def _reciprocal(self, x: float) -> float:
        return 1.0 / self.f.eval([x])[0]

    def value(self, x: float) -> float:
        """r(x), integrating 1/f from the nearest cached node."""
        x = float(x)
        if not (self.lo <= x <= self.hi):
            raise DomainError(f"x = {x} outside the working interval")
        i = bisect.bisect_left(self._xs, x)
        if i < len(self._xs) and self._xs[i] == x:
            return self._rs[i]
        candidates = [j for j in (i - 1, i) if 0 <= j < len(self._xs)]
        j = min(candidates, key=lambda j: abs(self._xs[j] - x))
        segment, _ = quad(self._reciprocal, self._xs[j], x,
                          epsabs=self.quad_tol, epsrel=self.quad_tol, limit=200)
        r = self._rs[j] + segment
        self._xs.insert(i, x)
        self._rs.insert(i, r)
        return r

    def inverse(self, rho: float) -> float:
        """The point y in the working interval with r(y) = rho."""
        increasing = self.sign > 0
        j = min(range(len(self._xs)), key=lambda j: abs(self._rs[j] - rho))
        y0 = self._xs[j]
        g0 = self._rs[j] - rho
        if g0 == 0.0:
            return y0
        span = self.hi - self.lo
        direction = 1.0 if (rho > self._rs[j]) == increasing else -1.0
        step = span / 64.0
        y_prev, g_prev = y0, g0
        while True:
            y_next = y0 + direction * step
            clipped = min(max(y_next, self.lo + self._inward), self.hi - self._inward)
            g_next = self.value(clipped) - rho
            if g_prev == 0.0:
                return y_prev
            if g_next == 0.0:
                return clipped
            if (g_prev < 0) != (g_next < 0):
                a, b = sorted((y_prev, clipped))
                return float(brentq(lambda y: self.value(y) - rho, a, b,
                                    xtol=1e-13, rtol=8.9e-16, maxiter=200))
            if clipped != y_next:
                raise DomainError(
                    f"target level {rho} is outside the attainable range of r on "
                    f"[{self.lo}, {self.hi}]: the flow exits the interval first")
            y_prev, g_prev = clipped, g_next
            step *= 2.0


def jabotinsky_flow(rf: RFunction, x: float, t: float, gamma=None) -> float:
    """Evaluate the closed-form flow r^(-1)(r(x) + t) of the field behind rf.

    ``gamma`` (a reparametrization with gamma(0) = 0, gamma'(0) = 1)
    replaces t by gamma(t); with a nontrivial gamma the result still solves
    the stationary flow identity pointwise but generally violates the
    translation equation, which is exactly what the hook is for in tests.
    """
    shift = t if gamma is None else gamma(t)
    return rf.inverse(rf.value(x) + shift)


# -- formal power series solutions ---------------------------------------------

def julia_series_residual(f: PowerSeries, phi: PowerSeries, order: int) -> PowerSeries:
    """phi' * f - f o phi, truncated at ``order`` (both inputs read as
    polynomials: absent coefficients are zero)."""
    lhs = phi.derive().mul(f, order=order)
    rhs = f.compose(phi.pad(order), order=order)
    return lhs.sub(rhs)


def iterative_logarithm(phi: PowerSeries, N: int) -> PowerSeries:
    """Normalized power-series solution of Julia's equation for a
    near-identity series phi = x + b_m x^m + ... with b_m != 0, m >= 2.

    The solution has the form b_m x^m + sum_{n>m} c_n x^n; each c_n is
    determined sequentially by matching the residual at order n + m - 1,
    the first order where it enters with the nonzero weight b_m (m - n).
    Orders below that are identities and are skipped.
    """
    if phi.coeff(0) != 0.0:
        raise PreconditionError("the series must have zero constant term")
    if phi.coeff(1) != 1.0:
        raise PreconditionError("the series must be a near-identity: linear coefficient 1")
    m = next((i for i in range(2, phi.N + 1) if phi.coeff(i) != 0.0), None)
    if m is None:
        raise PreconditionError("no nonlinear term: the identity flows under f = 0")
    if N < m + 1:
        raise PreconditionError(f"truncation order {N} determines no coefficient "
                                f"beyond the leading x^{m} term")
    work = N + m - 1
    phi_w = phi.pad(work)
    b_m = phi.coeff(m)
    coeffs = [0.0] * (work + 1)
    coeffs[m] = b_m
    for n in range(m + 1, N + 1):
        f_cur = PowerSeries(tuple(coeffs))
        residual = julia_series_residual(f_cur, phi_w, work)
        coeffs[n] = residual.coeff(n + m - 1) / (b_m * (n - m))
    return PowerSeries(tuple(coeffs)).truncate(N)


@dataclass
class MonomialCertificate:
    """All-zero series plus the order-by-order elimination showing why no
    nontrivial power-series field exists for x -> c x^alpha, alpha >= 2."""

    series: PowerSeries
    trace: list

    @property
    def all_zero(self) -> bool:
        return all(c == 0.0 for c in self.series.coeffs)


def monomial_series_solution(c: float, alpha: int, N: int) -> MonomialCertificate:
    """Run the coefficient elimination for Phi(x) = c x^alpha.

    Matching J_Phi f = f o Phi order by order forces every gamma_i to
    vanish; the returned trace records the order used against each index.
    """
    if c == 0:
        raise PreconditionError("c must be nonzero")
    if not float(alpha).is_integer() or alpha < 2:
        raise PreconditionError("the elimination applies to integer exponents alpha >= 2 "
                                "(alpha = 1 is the linear case, handled exactly)")
    alpha = int(alpha)
    trace = []
    for i in range(N + 1):
        if i == 0:
            trace.append("gamma_0 = 0: the composed side has constant term gamma_0, "
                         "the derivative side starts at x^(alpha-1)")
        elif i == 1:
            trace.append(f"gamma_1 = 0: order x^{alpha} gives "
                         f"c*alpha*gamma_1 = c*gamma_1 with alpha != 1")
        elif i % alpha != 1 % alpha:
            trace.append(f"gamma_{i} = 0: order x^{alpha - 1 + i} appears only on "
                         f"the derivative side")
        else:
            k = (i - 1) // alpha + 1
            trace.append(f"gamma_{i} = 0: order x^{k * alpha} gives "
                         f"alpha*gamma_{i} = c^{k - 1}*gamma_{k}, and gamma_{k} = 0 "
                         f"was already forced (k = {k} < {i})")
    return MonomialCertificate(PowerSeries((0.0,) * (N + 1)), trace)


# -- principal solution by iteration --------------------------------------------

@dataclass
class PrincipalSolutionResult:
    points: np.ndarray
    values: np.ndarray
    iterations: list
    residuals: list
    residual_max: float
    note: str

    @property
    def converged(self) -> bool:
        return all(n >= 0 for n in self.iterations)


def principal_solution_limit(phi: FuncSpec, grid: Grid, n_max: int = 10 ** 6,
                             tol: float = 1e-10) -> PrincipalSolutionResult:
    """Limit construction of the Julia solution for contracting interval maps.

    Requires 0 < Phi(x) < x on the (open) interval and derivative at 0
    strictly inside (0, 1). Per grid point the ratio of the n-th map iterate
    to its chain-rule derivative is driven to convergence, comparing values
    at geometrically spaced checkpoints; the result is normalized (unit
    scale) and validated through the Julia residual, which is also computed
    by iteration at the image points.
    """
    if phi.n_in != 1 or phi.n_out != 1:
        raise PreconditionError("the limit construction applies to 1-D maps")
    dphi = diff(phi, 0)
    if not phi.domain.contains([0.0]):
        raise PreconditionError("the interval must contain 0 (maps [0, b] -> [0, b])")
    s = dphi.eval([0.0])[0]
    if not 0.0 < s < 1.0:
        raise PreconditionError(
            f"derivative at 0 is {s}; the limit construction needs 0 < Phi'(0) < 1 "
            f"(s = 0 admits only f = 0, s = 1 is outside this construction)")
    xs = grid.points()[:, 0]
    for x in xs:
        y = phi.eval([x])[0]
        if not 0.0 < y < x:
            raise PreconditionError(
                f"hypothesis violated at x = {x}: need 0 < Phi(x) < x, got Phi(x) = {y}")

    def limit_at(x0: float) -> tuple[float, int]:
        y = float(x0)
        deriv = 1.0
        ratio_prev = y / deriv
        n = 0
        checkpoint = 1
        while n < n_max:
            deriv *= dphi.eval([y])[0]
            y = phi.eval([y])[0]
            n += 1
            if n == checkpoint:
                if deriv == 0.0 or y == 0.0:
                    raise PreconditionError(
                        f"iterates underflowed before convergence at x = {x0}")
                ratio = y / deriv
                if abs(ratio - ratio_prev) < tol:
                    return ratio, n
                ratio_prev = ratio
                checkpoint *= 2
        raise PreconditionError(f"no convergence within {n_max} iterations at x = {x0}")

    values = []
    iterations = []
    residuals = []
    for x in xs:
        v, n = limit_at(x)
        values.append(v)
        iterations.append(n)
        image = phi.eval([x])[0]
        v_image, _ = limit_at(image)
        residuals.append(abs(dphi.eval([x])[0] * v - v_image))
    return PrincipalSolutionResult(
        np.asarray(xs), np.asarray(values), iterations, residuals,
        max(residuals) if residuals else 0.0,
        note="ratio of map iterates to their chain-rule derivative; "
             "normalized to unit scale and validated via the Julia residual")
