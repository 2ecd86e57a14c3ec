"""Factories for explicit exact embeddings.

Each factory returns a :class:`NodeArchitecture` whose time-T map equals its
target on the stated domain, together with a closed-form solution evaluator
attached as ``closed_form`` for use as an integration oracle. Rejections
mirror the non-existence results: e.g. c*x with c <= 0 has no 1-D flow
realization because 1-D time-T maps are strictly increasing.
"""

import math

import numpy as np

from .errors import DomainError, PreconditionError
from .expr import (Domain, DomainDim, FuncSpec, const, interval, ln, mul,
                   neg, reals, var)
from .architectures import LinearLayer, NodeArchitecture
from .ode import IntegratorConfig, VectorFieldSpec


def _cfg(cfg):
    return cfg or IntegratorConfig()


def construct_linear(c: float, T: float, cfg: IntegratorConfig | None = None
                     ) -> NodeArchitecture:
    """Basic 1-D architecture with time-T map x -> c*x, for c > 0.

    Field f(h) = (ln c / T) h; the flow is h_x(t) = x * c^(t/T).
    """
    if c <= 0:
        raise PreconditionError(
            "no basic neural ODE realizes x -> c*x for c <= 0: 1-D time-T maps "
            "are strictly increasing, so c must be positive")
    if not T > 0:
        raise PreconditionError("horizon T must be positive")
    rate = math.log(c) / T
    func = FuncSpec("linear-field", 1, 1, (mul(const(rate), var(0)),), reals(1))

    def closed_form(x, t):
        return np.array([float(x) * c ** (t / T)])

    return NodeArchitecture(
        "basic", VectorFieldSpec(1, func), T, 1, 1, reals(1),
        cfg=_cfg(cfg), closed_form=closed_form, construction="linear",
        basis=f"field f(h) = (ln {c} / T) h gives the flow x c^(t/T), "
              f"whose time-T map is {c} x; for c <= 0 no 1-D realization exists")


def construct_monomial(c: float, alpha: float, T: float,
                       cfg: IntegratorConfig | None = None) -> NodeArchitecture:
    """Basic 1-D architecture on x > 0 with time-T map x -> c*x^alpha.

    Field f(h) = (ln alpha / T) h ln(kappa h) with kappa = c^(1/(alpha-1));
    the flow is h_x(t) = kappa^(-1) (kappa x)^(alpha^(t/T)).
    """
    if c <= 0:
        raise PreconditionError("coefficient c must be positive")
    if alpha in (0.0, 1.0):
        raise PreconditionError(
            "alpha in {0, 1} is outside this construction; use construct_linear "
            "for alpha = 1 (x -> c is not realizable at all)")
    if alpha < 0:
        raise PreconditionError("exponent alpha must be positive")
    if not T > 0:
        raise PreconditionError("horizon T must be positive")
    # kappa computed once via exp/ln to avoid branch issues for real exponents
    kappa = math.exp(math.log(c) / (alpha - 1.0))
    rate = math.log(alpha) / T
    domain = interval(0.0, math.inf, lo_open=True, hi_open=True, positive=True)
    func = FuncSpec("monomial-field", 1, 1,
                    (mul(mul(const(rate), var(0)), ln(mul(const(kappa), var(0)))),),
                    domain)

    def closed_form(x, t):
        x = float(x)
        if x <= 0:
            raise DomainError("the monomial flow is defined for x > 0")
        return np.array([(kappa * x) ** (alpha ** (t / T)) / kappa])

    return NodeArchitecture(
        "basic", VectorFieldSpec(1, func), T, 1, 1, domain,
        cfg=_cfg(cfg), closed_form=closed_form, construction="monomial",
        basis=f"field f(h) = (ln {alpha} / T) h ln(c^(1/(alpha-1)) h) on h > 0 has the "
              f"flow c^(1/(1-alpha)) (x c^(1/(alpha-1)))^(alpha^(t/T)) with time-T "
              f"map {c} x^{alpha}")


_MOEBIUS_MARGIN = 1e-9  # relative margin keeping the adaptive solver off the pole


def construct_moebius(c: float, T: float, cfg: IntegratorConfig | None = None
                      ) -> NodeArchitecture:
    """Basic 1-D architecture with time-T map x -> x / (1 - c*x).

    Field f(h) = (c / T) h^2; the flow is h_x(t) = x / (1 - c x t / T), valid
    while c x t / T < 1. Initial conditions with c*x close to or past 1 are
    rejected because the solution blows up before the horizon.
    """
    if c == 0:
        raise PreconditionError("c = 0 gives the identity; use construct_linear(c=1)")
    if not T > 0:
        raise PreconditionError("horizon T must be positive")
    # the admissible set c*x*(1 + margin) < 1 expressed as the input domain,
    # so evaluation rejects initial conditions whose pole sits at or before T
    edge = 1.0 / (c * (1.0 + _MOEBIUS_MARGIN))
    if c > 0:
        domain = interval(-math.inf, edge, lo_open=True, hi_open=True)
    else:
        domain = interval(edge, math.inf, lo_open=True, hi_open=True)
    func = FuncSpec("moebius-field", 1, 1,
                    (mul(const(c / T), mul(var(0), var(0))),), reals(1))

    def closed_form(x, t):
        x = float(x)
        denom = 1.0 - c * x * t / T
        if denom <= _MOEBIUS_MARGIN:
            raise DomainError(
                f"solution from x={x} leaves its validity region before t={t} "
                f"(pole at t = T/(c x))")
        return np.array([x / denom])

    arch = NodeArchitecture(
        "basic", VectorFieldSpec(1, func), T, 1, 1, domain,
        cfg=_cfg(cfg), closed_form=closed_form, construction="moebius",
        basis=f"field f(h) = ({c} / T) h^2 has the flow x / (1 - {c} x t / T); its "
              f"time-T map is x / (1 - {c} x) on initial conditions with {c} x < 1")
    return arch


def moebius_admissible(c: float, T: float, x: float) -> bool:
    """Initial condition check: the flow from x must exist through t = T with
    a small safety margin."""
    return c * float(x) * (T + _MOEBIUS_MARGIN * T) / T < 1.0


def construct_negation(T: float, cfg: IntegratorConfig | None = None) -> NodeArchitecture:
    """Augmented (m = 2) architecture with time-T map x -> -x.

    Field (pi/T) (-h2, h1) rotates the plane by pi over the horizon, taking
    (x, 0) to (-x, 0); the trailing component returns to zero.
    """
    if not T > 0:
        raise PreconditionError("horizon T must be positive")
    w = math.pi / T
    func = FuncSpec("rotation-field", 2, 2,
                    (mul(const(w), neg(var(1))), mul(const(w), var(0))), reals(2))

    def closed_form(x, t):
        x = float(x)
        return np.array([x * math.cos(w * t), x * math.sin(w * t)])

    return NodeArchitecture(
        "augmented", VectorFieldSpec(2, func), T, 1, 1, reals(1),
        cfg=_cfg(cfg), closed_form=closed_form, construction="negation",
        basis="planar rotation field (pi/T)(-h2, h1) from (x, 0) reaches (-x, 0) at "
              "time T, embedding x -> -x with one augmented dimension")


def construct_polynomial(coeffs, T: float, cfg: IntegratorConfig | None = None
                         ) -> NodeArchitecture:
    """Two-layer architecture computing sum_k a_k x^k on x > 0.

    The inner layer replicates x into n coordinates; coordinate k flows under
    the monomial field for x^k (zero field for k = 1), and the outer layer
    takes the linear combination with the given coefficients.
    """
    coeffs = [float(a) for a in coeffs]
    n = len(coeffs)
    if n < 1:
        raise PreconditionError("at least one coefficient is required")
    if not T > 0:
        raise PreconditionError("horizon T must be positive")
    x_domain = interval(0.0, math.inf, lo_open=True, hi_open=True, positive=True)
    layer1 = FuncSpec("replicate", 1, n, tuple(var(0) for _ in range(n)), x_domain)
    field_domain = Domain(tuple(DomainDim(0.0, math.inf, True, True, True)
                                for _ in range(n)))
    comps = [const(0.0)]
    for k in range(2, n + 1):
        rate = math.log(k) / T
        comps.append(mul(mul(const(rate), var(k - 1)), ln(var(k - 1))))
    func = FuncSpec("diagonal-monomial-field", n, n, tuple(comps), field_domain)
    combo = const(0.0)
    from .expr import add as _add
    for k, a in enumerate(coeffs):
        combo = _add(combo, mul(const(a), var(k)))
    layer2 = FuncSpec("coefficients", n, 1, (combo,),
                      Domain(tuple(DomainDim(-math.inf, math.inf, True, True)
                                   for _ in range(n))))

    def closed_form(x, t):
        x = float(x)
        if x <= 0:
            raise DomainError("the polynomial construction is defined for x > 0")
        return np.array([x ** (float(k) ** (t / T)) for k in range(1, n + 1)])

    return NodeArchitecture(
        "two_layer", VectorFieldSpec(n, func), T, 1, 1, x_domain,
        layer1=layer1, layer2=layer2, cfg=_cfg(cfg), closed_form=closed_form,
        construction="polynomial",
        basis="coordinate k flows under (ln k / T) h ln h from x to x^k (k = 1 is "
              "frozen), so the output layer's combination equals "
              "sum_k a_k x^k exactly on x > 0")


def construct_universal(phi: FuncSpec, T: float, cfg: IntegratorConfig | None = None
                        ) -> NodeArchitecture:
    """Augmented-with-linear architecture reproducing any evaluable map.

    In dimension m = n_in + n_out, the first block of coordinates is frozen
    at the input and the second integrates phi(x)/T, so the time-T map holds
    (x, phi(x)); the projection A = [0 I] returns phi(x). Works for maps with
    no basic realization (non-monotone, critical points, ...).
    """
    if not T > 0:
        raise PreconditionError("horizon T must be positive")
    n_in, n_out = phi.n_in, phi.n_out
    m = n_in + n_out
    comps = tuple(const(0.0) for _ in range(n_in)) + tuple(
        mul(const(1.0 / T), c) for c in phi.components)
    dims = phi.domain.dims + tuple(DomainDim(-math.inf, math.inf, True, True)
                                   for _ in range(n_out))
    func = FuncSpec(f"frozen-{phi.name}", m, m, comps, Domain(dims))
    A = np.hstack([np.zeros((n_out, n_in)), np.eye(n_out)])
    layer = LinearLayer(A, np.zeros(n_out))

    def closed_form(x, t):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.concatenate([x, (t / T) * phi.eval(x)])

    return NodeArchitecture(
        "augmented_with_linear", VectorFieldSpec(m, func), T, n_in, n_out,
        phi.domain, linear=layer, cfg=_cfg(cfg), closed_form=closed_form,
        construction="universal",
        basis="freeze the input block and integrate the target over it: the field "
              "(0, phi(h_in)/T) from (x, 0) reaches (x, phi(x)) at time T, and "
              "A = [0 I] projects out phi(x); any integrable map embeds this way")


def closed_form_solution(arch: NodeArchitecture, x, t: float) -> np.ndarray:
    """Analytic state of a constructed architecture's flow at time t.

    Serves as the independent oracle against numerical integration; raises
    DomainError outside the validity region of the formula.
    """
    if arch.closed_form is None:
        raise PreconditionError(
            f"architecture {arch.construction or arch.variant!r} carries no closed form")
    return arch.closed_form(x, t)


CONSTRUCTIONS = {
    "linear": construct_linear,
    "monomial": construct_monomial,
    "moebius": construct_moebius,
    "negation": construct_negation,
    "polynomial": construct_polynomial,
    "universal": construct_universal,
}
