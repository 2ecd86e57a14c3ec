"""Critical-point analysis and embeddability diagnosis.

A scalar component with a certified topologically critical point blocks the
basic, linear-layer and augmented architectures at once; certification means
an explicit local chart bringing the component to the form
``value at p plus/minus a sum of squares``. Nondegenerate critical points
certify directly; 1-D degenerate points with an even first nonvanishing
derivative certify through the composed normal-form/root chart; everything
else is reported as inconclusive or out of scope, never as an obstruction.

1-D maps get two extra detectors: strict monotonicity (any decrease kills
the basic architecture) and the fixed-point separation test (a point mapped
across a fixed point cannot ride a non-crossing flow).
"""

import math
from dataclasses import dataclass, field as _dcfield

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InconclusiveError, PreconditionError
from .expr import (FuncSpec, Grid, diff_expr, eval_expr, gradient,
                   hessian_matrix)

CRITICAL_TOL = 1e-9          # gradient norm at accepted critical points
DERIVATIVE_CAP = 12          # highest derivative order chased in 1-D
_NEWTON_MAX_ITER = 50
_DERIV_NONZERO = 1e-6        # |Psi^(k)(p)| above this counts as nonvanishing


def _degeneracy_threshold(eigs: np.ndarray) -> float:
    scale = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    return 1e-6 * (1.0 + scale)


@dataclass
class CriticalPoint:
    """A classified critical point of a scalar map."""

    location: np.ndarray
    grad_norm: float
    eigenvalues: np.ndarray
    index: int
    degenerate: bool
    order: int | None = None   # 1-D: first k with Psi^(k)(p) != 0 (2 if nondegenerate)
    gamma: float | None = None  # the value of that derivative

    def to_dict(self) -> dict:
        return {
            "location": [float(v) for v in self.location],
            "grad_norm": self.grad_norm,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "index": self.index,
            "degenerate": self.degenerate,
            "order": self.order,
            "gamma": self.gamma,
        }


def _numeric_jacobian(spec: FuncSpec, x: np.ndarray) -> np.ndarray:
    n = spec.n_in
    J = np.empty((spec.n_out, n))
    for j in range(n):
        h = 1e-6 * (1.0 + abs(float(x[j])))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (spec.eval(xp) - spec.eval(xm)) / (2.0 * h)
    return J


def find_critical_points(psi: FuncSpec, grid: Grid, tol: float = CRITICAL_TOL) -> list:
    """Zeros of the gradient, by Newton iteration from every grid seed.

    Iteration uses the numeric Jacobian of the symbolic gradient;
    non-converging or escaping seeds are dropped. Returned points satisfy
    ||grad(p)|| <= tol, lie in the domain, and are deduplicated within a
    radius proportional to the domain span.
    """
    if psi.n_out != 1:
        raise PreconditionError("critical points are defined for scalar maps")
    grad = gradient(psi)
    span = grid.span
    escape = 100.0 * (1.0 + span + max(abs(d.lo) + abs(d.hi) for d in grid.domain.dims))
    found = []
    for seed in grid.points():
        x = seed.copy()
        alive = True
        # iterate to position convergence: a gradient-norm stop alone accepts
        # sloppy points at degenerate roots, where Newton is only linear
        for _ in range(_NEWTON_MAX_ITER):
            try:
                g = grad.eval(x)
                J = _numeric_jacobian(grad, x)
                delta = np.linalg.solve(J, -g)
            except (DomainError, np.linalg.LinAlgError):
                alive = False
                break
            x = x + delta
            if not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > escape:
                alive = False
                break
            if float(np.linalg.norm(delta)) <= 1e-13 * (1.0 + float(np.linalg.norm(x))):
                break
        if not alive or not psi.domain.contains(x):
            continue
        if psi.n_in == 1:
            x = _polish_1d(grad, x)
        try:
            if float(np.linalg.norm(grad.eval(x))) <= tol:
                found.append(x)
        except DomainError:
            pass
    dedup_radius = 1e-6 * span
    found.sort(key=lambda p: tuple(p))
    unique = []
    for p in found:
        if not any(float(np.linalg.norm(p - q)) <= dedup_radius for q in unique):
            unique.append(p)
    return unique


def _polish_1d(grad: FuncSpec, x: np.ndarray) -> np.ndarray:
    """Refine a 1-D gradient root by bisection when a sign change brackets it.

    The finite-difference Jacobian biases Newton at roots of multiplicity
    three and higher, stalling it orders of magnitude away from the root;
    odd-multiplicity roots carry a sign change, so a bracketed solve
    restores full accuracy there.
    """
    r = 1e-4 * (1.0 + abs(float(x[0])))
    a, b = float(x[0]) - r, float(x[0]) + r
    try:
        ga, gb = grad.eval([a])[0], grad.eval([b])[0]
    except DomainError:
        return x
    if ga == 0.0 or gb == 0.0 or (ga < 0) == (gb < 0):
        return x
    root = brentq(lambda v: grad.eval([v])[0], a, b, xtol=1e-14)
    return np.array([float(root)])


def classify_critical(psi: FuncSpec, p) -> CriticalPoint:
    """Classify a critical point: Hessian eigenvalues, index, degeneracy;
    in 1-D a degenerate point is chased through higher derivatives up to
    order 12 (raising InconclusiveError if they all vanish)."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    grad_norm = float(np.linalg.norm(gradient(psi).eval(p)))
    H = hessian_matrix(psi, p)
    eigs = np.linalg.eigvalsh(H)
    thresh = _degeneracy_threshold(eigs)
    degenerate = bool(np.any(np.abs(eigs) <= thresh))
    index = int(np.sum(eigs < -thresh))
    order = None
    gamma = None
    if psi.n_in == 1:
        deriv = diff_expr(psi.components[0], 0)
        for k in range(1, DERIVATIVE_CAP + 1):
            value = eval_expr(deriv, p)
            if k >= 2 and abs(value) > _DERIV_NONZERO:
                order = k
                gamma = float(value)
                break
            deriv = diff_expr(deriv, 0)
        else:
            raise InconclusiveError(
                f"all derivatives through order {DERIVATIVE_CAP} vanish at {p[0]}; "
                f"classification inconclusive")
    return CriticalPoint(p, grad_norm, eigs, index, degenerate, order, gamma)


# -- 1-D normal forms -----------------------------------------------------------

@dataclass
class NormalFormResult:
    """Local coordinates straightening a 1-D map to value(p) + sign * u^k.

    ``eta`` maps x-space to u-space, ``mu`` is its bracketed inverse on the
    reported symmetric neighborhood |u| <= u_radius.
    """

    p: float
    k: int
    gamma: float
    sign: float
    x_radius: float
    u_radius: float
    eta: object
    mu: object
    residual_max: float


def _kth_derivative_at(psi: FuncSpec, p: float, k: int) -> float:
    e = psi.components[0]
    for _ in range(k):
        e = diff_expr(e, 0)
    return eval_expr(e, [p])


def morse_normal_form_1d(psi: FuncSpec, p: float, k: int,
                         n_test: int = 41) -> NormalFormResult:
    """Build the straightening chart at a 1-D critical point of order k.

    With gamma the k-th derivative at p and s its sign, the remainder
    g(x) = (Psi(x) - Psi(p)) / (x - p)^k (continued by gamma/k! at p) is
    positive after multiplication by s near p, and
    eta(x) = s (s g(x))^(1/k) (x - p) satisfies
    Psi(mu(u)) = Psi(p) + s^(k-1) u^k for the inverse mu.

    The returned residual is the max over test points of the defect of that
    identity on the largest symmetric u-interval found.
    """
    if psi.n_in != 1 or psi.n_out != 1:
        raise PreconditionError("normal forms are implemented for 1-D scalar maps")
    p = float(p)
    if k < 2:
        raise PreconditionError("the order k must be >= 2 at a critical point")
    gamma = _kth_derivative_at(psi, p, k)
    if abs(gamma) <= _DERIV_NONZERO:
        raise PreconditionError(f"derivative of order {k} vanishes at p = {p}")
    s = 1.0 if gamma > 0 else -1.0
    psi_p = psi.eval([p])[0]
    taylor = gamma / math.factorial(k)

    def g(x: float) -> float:
        dx = x - p
        if abs(dx) < 1e-8 * (1.0 + abs(p)):
            return taylor
        return (psi.eval([x])[0] - psi_p) / dx ** k

    def eta(x: float) -> float:
        sg = s * g(x)
        if sg <= 0.0:
            raise DomainError(f"s*g changes sign at x = {x}; outside the chart region")
        return s * sg ** (1.0 / k) * (x - p)

    dim = psi.domain.dims[0]
    room = min(p - dim.lo, dim.hi - p)
    radius = 0.9 * room if math.isfinite(room) else 1.0
    for _ in range(60):
        xs = np.linspace(p - radius, p + radius, 65)
        try:
            values = [eta(x) for x in xs]
        except DomainError:
            radius *= 0.5
            continue
        steps = np.diff(values)
        if np.all(steps > 0) or np.all(steps < 0):
            break
        radius *= 0.5
    else:
        raise PreconditionError(
            f"no symmetric interval around {p} keeps s*g positive and eta monotone")

    u_lo, u_hi = eta(p - radius), eta(p + radius)
    u_radius = 0.99 * min(abs(u_lo), abs(u_hi))

    def mu(u: float) -> float:
        if abs(u) > min(abs(u_lo), abs(u_hi)):
            raise DomainError(f"u = {u} outside the chart neighborhood")
        a, b = p - radius, p + radius
        return float(brentq(lambda x: eta(x) - u, a, b, xtol=1e-14, rtol=8.9e-16))

    residual = 0.0
    for u in np.linspace(-u_radius, u_radius, n_test):
        got = psi.eval([mu(u)])[0]
        want = psi_p + s ** (k - 1) * u ** k
        residual = max(residual, abs(got - want))
    return NormalFormResult(p, k, gamma, s, radius, u_radius, eta, mu, residual)


@dataclass
class ChartResult:
    """Homeomorphic chart: Psi(chart(v)) = Psi(p) + sign * v^2 (k even)."""

    p: float
    k: int
    sign: float
    v_radius: float
    chart: object
    residual_max: float
    normal_form: NormalFormResult


def topological_chart_1d(psi: FuncSpec, p: float, k: int,
                         n_test: int = 41) -> ChartResult:
    """Compose the order-k normal form with the root map
    v -> sign(v) |v|^(2/k) to exhibit p as topologically critical with a
    plus/minus v^2 chart. Odd k is rejected: the odd normal form is
    strictly monotone, hence topologically ordinary."""
    if k % 2 != 0:
        raise PreconditionError(
            f"order {k} is odd: the point is topologically ordinary, no "
            f"plus/minus v^2 chart exists")
    nf = morse_normal_form_1d(psi, p, k)
    v_radius = nf.u_radius ** (k / 2.0)

    def chart(v: float) -> float:
        u = math.copysign(abs(v) ** (2.0 / k), v)
        return nf.mu(u)

    psi_p = psi.eval([float(p)])[0]
    residual = 0.0
    for v in np.linspace(-v_radius, v_radius, n_test):
        got = psi.eval([chart(v)])[0]
        want = psi_p + nf.sign * v * v
        residual = max(residual, abs(got - want))
    return ChartResult(float(p), k, nf.sign, v_radius, chart, residual, nf)


# -- perturbation and norms -------------------------------------------------------

@dataclass
class MorseifyResult:
    perturbed: FuncSpec
    shift: np.ndarray
    critical_points: list
    attempts: int

    @property
    def all_nondegenerate(self) -> bool:
        return all(not cp.degenerate for cp in self.critical_points)


def morseify(psi: FuncSpec, bound: float, seed: int,
             grid: Grid | None = None, retries: int = 5) -> MorseifyResult:
    """Add a random linear term a . x with ||a||_inf <= bound and re-check.

    Degenerate draws are rejected and redrawn (failures form a null set, so
    more than a retry or two should never happen); the accepted result
    carries the re-classified critical points of the perturbed map.
    """
    if psi.n_out != 1:
        raise PreconditionError("morseify applies to scalar maps")
    if bound <= 0:
        raise PreconditionError("the perturbation bound must be positive")
    from .expr import add as _add, const as _const, mul as _mul, var as _var
    rng = np.random.default_rng(seed)
    grid = grid or Grid(psi.domain, (32,) * psi.n_in)
    for attempt in range(1, retries + 1):
        a = rng.uniform(-bound, bound, size=psi.n_in)
        e = psi.components[0]
        for j in range(psi.n_in):
            e = _add(e, _mul(_const(a[j]), _var(j)))
        perturbed = FuncSpec(f"{psi.name}+shift", psi.n_in, 1, (e,), psi.domain)
        try:
            cps = [classify_critical(perturbed, p)
                   for p in find_critical_points(perturbed, grid)]
        except InconclusiveError:
            continue
        if all(not cp.degenerate for cp in cps):
            return MorseifyResult(perturbed, a, cps, attempt)
    raise InconclusiveError(
        f"all {retries} perturbation draws left a degenerate critical point")


def ck_norm(psi: FuncSpec, k: int, grid: Grid) -> float:
    """Sum over all partial-derivative multi-indices |s| <= k of the grid
    sup of |d^s Psi|; a lower bound of the true norm since the sup is taken
    over samples."""
    if psi.n_out != 1:
        raise PreconditionError("the C^k norm applies to scalar maps")
    if k < 0:
        raise PreconditionError("k must be >= 0")
    n = psi.n_in
    points = grid.points()
    exprs = {(0,) * n: psi.components[0]}
    frontier = [(0,) * n]
    for _ in range(k):
        new_frontier = []
        for idx in frontier:
            for j in range(n):
                bumped = tuple(v + 1 if i == j else v for i, v in enumerate(idx))
                if bumped not in exprs:
                    exprs[bumped] = diff_expr(exprs[idx], j)
                    new_frontier.append(bumped)
        frontier = new_frontier
    total = 0.0
    for e in exprs.values():
        total += max(abs(eval_expr(e, x)) for x in points)
    return total


# -- topological detectors ---------------------------------------------------------

def antipodal_point(g: FuncSpec, tol: float = 1e-10) -> np.ndarray:
    """A point u on the unit circle with g(u) = g(-u), within tol.

    The difference d(theta) = g(theta) - g(theta + pi) flips sign between 0
    and pi, so bisection always succeeds; a flat d returns immediately.
    """
    if g.n_in != 2 or g.n_out != 1:
        raise PreconditionError("the antipodal finder works on scalar maps of the circle")

    def point(theta: float) -> np.ndarray:
        return np.array([math.cos(theta), math.sin(theta)])

    def d(theta: float) -> float:
        return g.eval(point(theta))[0] - g.eval(-point(theta))[0]

    a, b = 0.0, math.pi
    da = d(a)
    if abs(da) <= tol:
        return point(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        dm = d(mid)
        if abs(dm) <= tol or (b - a) < 1e-16:
            return point(mid)
        if (dm < 0) == (da < 0):
            a, da = mid, dm
        else:
            b = mid
    return point(0.5 * (a + b))


@dataclass
class SeparationWitness:
    """A fixed point z and a sample x* mapped strictly across it."""

    fixed_point: float
    x_star: float
    image: float

    def to_dict(self) -> dict:
        return {"fixed_point": self.fixed_point, "x_star": self.x_star,
                "image": self.image}


def separation_obstruction_1d(phi: FuncSpec, grid: Grid) -> SeparationWitness | None:
    """Look for a sample whose image lands on the far side of a fixed point.

    The map is the identity on each fixed point, and a 1-D flow trajectory
    cannot cross the resulting closed loop, so a witness rules out the basic
    architecture.
    """
    if phi.n_in != 1 or phi.n_out != 1:
        raise PreconditionError("the separation detector is 1-D only")
    xs = grid.points()[:, 0]
    displacement = np.array([phi.eval([x])[0] - x for x in xs])
    side_tol = 1e-9 * grid.span
    fixed = []
    for i in range(len(xs) - 1):
        if abs(displacement[i]) <= side_tol:
            fixed.append(float(xs[i]))
        elif (displacement[i] < 0) != (displacement[i + 1] < 0):
            z = float(brentq(lambda x: phi.eval([x])[0] - x, xs[i], xs[i + 1],
                             xtol=1e-14))
            fixed.append(z)
    if abs(displacement[-1]) <= side_tol:
        fixed.append(float(xs[-1]))
    for x in xs:
        y = phi.eval([x])[0]
        for z in fixed:
            a, b = x - z, y - z
            if abs(a) > side_tol and abs(b) > side_tol and (a < 0) != (b < 0):
                return SeparationWitness(z, float(x), float(y))
    return None


# -- the verdict --------------------------------------------------------------------

NON_EMBEDDABLE = "NON-EMBEDDABLE"
NO_OBSTRUCTION = "NO-OBSTRUCTION-FOUND"


@dataclass
class CriticalPointFinding:
    point: CriticalPoint | None
    location: np.ndarray
    topo_status: str       # critical-with-index | ordinary | inconclusive | out-of-scope
    certificate: str

    def to_dict(self) -> dict:
        d = {} if self.point is None else self.point.to_dict()
        d.update({"location": [float(v) for v in self.location],
                  "topo_status": self.topo_status,
                  "certificate": self.certificate})
        return d


@dataclass
class ComponentDiagnosis:
    index: int
    findings: list
    status: str            # established | not-established | out-of-scope

    def to_dict(self) -> dict:
        return {"component": self.index,
                "critical_points": [f.to_dict() for f in self.findings],
                "status": self.status}


@dataclass
class DiagnosisReport:
    components: list
    verdicts: dict
    recommendation: str | None
    monotone_witness: tuple | None = None
    separation: SeparationWitness | None = None
    notes: list = _dcfield(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "components": [c.to_dict() for c in self.components],
            "verdicts": dict(self.verdicts),
            "recommendation": self.recommendation,
            "witnesses": {
                "monotonicity": None if self.monotone_witness is None else
                    [float(v) for v in self.monotone_witness],
                "separation": None if self.separation is None else
                    self.separation.to_dict(),
            },
            "notes": list(self.notes),
        }


def diagnose(phi: FuncSpec, grid: Grid) -> DiagnosisReport:
    """Per-architecture embeddability verdict for a differentiable map.

    Any component with a certified topologically critical point rules out
    the basic, with-linear-layer and augmented architectures together; the
    recommendation is then the universal augmented-with-linear
    construction, which embeds any evaluable map. 1-D maps additionally
    get the monotonicity and fixed-point separation detectors, which rule
    out the basic architecture alone. NO-OBSTRUCTION-FOUND is not a proof
    of embeddability.
    """
    notes = []
    components = []
    any_established = False
    for i in range(phi.n_out):
        psi = phi.component(i)
        findings = []
        established = False
        out_of_scope = False
        for p in find_critical_points(psi, grid):
            try:
                cp = classify_critical(psi, p)
            except InconclusiveError as err:
                findings.append(CriticalPointFinding(None, p, "inconclusive", str(err)))
                continue
            if not cp.degenerate:
                findings.append(CriticalPointFinding(
                    cp, p, "critical-with-index",
                    f"nondegenerate Hessian, index {cp.index}: a plus/minus "
                    f"sum-of-squares chart exists"))
                established = True
            elif phi.n_in == 1:
                if cp.order is not None and cp.order % 2 == 0:
                    try:
                        chart = topological_chart_1d(psi, float(p[0]), cp.order)
                    except (PreconditionError, DomainError) as err:
                        findings.append(CriticalPointFinding(
                            cp, p, "inconclusive", f"chart construction failed: {err}"))
                        continue
                    if chart.residual_max <= 1e-8:
                        findings.append(CriticalPointFinding(
                            cp, p, "critical-with-index",
                            f"order-{cp.order} chart verified, residual "
                            f"{chart.residual_max:.3g}, index "
                            f"{0 if chart.sign > 0 else 1}"))
                        established = True
                    else:
                        findings.append(CriticalPointFinding(
                            cp, p, "inconclusive",
                            f"chart residual {chart.residual_max:.3g} too large"))
                else:
                    findings.append(CriticalPointFinding(
                        cp, p, "ordinary",
                        f"odd order {cp.order}: strictly monotone normal form, "
                        f"topologically ordinary"))
            else:
                out_of_scope = True
                findings.append(CriticalPointFinding(
                    cp, p, "out-of-scope",
                    "degenerate critical point in dimension >= 2: no general "
                    "chart construction is attempted"))
        if established:
            status = "established"
            any_established = True
        elif out_of_scope:
            status = "out-of-scope"
        else:
            status = "not-established"
        components.append(ComponentDiagnosis(i, findings, status))

    verdicts = {name: NON_EMBEDDABLE if any_established else NO_OBSTRUCTION
                for name in ("node1", "node2", "node3")}

    monotone_witness = None
    separation = None
    if phi.n_in == 1 and phi.n_out == 1:
        xs = grid.points()[:, 0]
        values = [phi.eval([x])[0] for x in xs]
        for (x1, y1), (x2, y2) in zip(zip(xs, values), zip(xs[1:], values[1:])):
            if y1 >= y2:
                monotone_witness = (float(x1), float(x2), y1, y2)
                verdicts["node1"] = NON_EMBEDDABLE
                notes.append("not strictly increasing: 1-D time-T maps of "
                             "well-posed flows are strictly increasing")
                break
        separation = separation_obstruction_1d(phi, grid)
        if separation is not None:
            verdicts["node1"] = NON_EMBEDDABLE
            notes.append("a sample is mapped across a fixed point: trajectories "
                         "of a unique flow cannot cross the loop through it")
    else:
        notes.append("separation detection is restricted to 1-D fixed points; "
                     "no separating identity set is searched for in higher dimension")

    recommendation = "universal" if NON_EMBEDDABLE in verdicts.values() else None
    return DiagnosisReport(components, verdicts, recommendation,
                           monotone_witness, separation, notes)
