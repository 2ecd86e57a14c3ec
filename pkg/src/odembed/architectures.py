"""The five neural-ODE architectures as evaluable pipelines, plus the grid
verifier deciding whether a candidate architecture reproduces a target map.

Variants:

* ``basic``                  x -> h_x(T)
* ``with_linear``            x -> A h_x(T) + a
* ``augmented``              x -> first n components of h_(x,0)(T)
* ``augmented_with_linear``  x -> L(h_(x,0)(T))
* ``two_layer``              x -> L2(h_{L1(x)}(T)) with arbitrary FuncSpec layers
"""

import json
import math
from dataclasses import dataclass, field as _dcfield

import numpy as np

from .errors import DomainError, IntegrationError, PreconditionError
from .expr import (Domain, FuncSpec, Grid, domain_from_list, domain_to_list,
                   funcspec_from_dict, funcspec_to_dict)
from .ode import IntegratorConfig, VectorFieldSpec, time_T_map

VARIANTS = ("basic", "with_linear", "augmented", "augmented_with_linear", "two_layer")


@dataclass(frozen=True, eq=False)
class LinearLayer:
    """Affine layer x -> A x + a."""

    A: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)))
        if self.A.shape[0] != self.a.shape[0]:
            raise PreconditionError("offset length must match the matrix row count")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.a))):
            raise PreconditionError("layer entries must be finite")

    @property
    def n_out(self) -> int:
        return self.A.shape[0]

    @property
    def n_in(self) -> int:
        return self.A.shape[1]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.A @ v + self.a


@dataclass(frozen=True, eq=False)
class NodeArchitecture:
    """One architecture instance: variant + field + horizon (+ layers).

    ``closed_form``, when present, is an oracle callable (x, t) -> full ODE
    state, attached by the construction factories; it plays no part in
    evaluation.
    """

    variant: str
    field: VectorFieldSpec
    T: float
    n_in: int
    n_out: int
    input_domain: Domain
    linear: LinearLayer | None = None
    layer1: FuncSpec | None = None
    layer2: FuncSpec | None = None
    cfg: IntegratorConfig = _dcfield(default_factory=IntegratorConfig)
    closed_form: object = None
    construction: str = ""
    basis: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise PreconditionError(f"unknown variant {self.variant!r}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise PreconditionError("horizon T must be positive and finite")
        m = self.field.dim
        if self.variant == "basic":
            if not (self.n_in == self.n_out == m):
                raise PreconditionError("basic variant requires field dim = n_in = n_out")
        elif self.variant == "with_linear":
            if self.n_in != m or self.linear is None:
                raise PreconditionError("with_linear requires a layer on an n_in-dim field")
            if self.linear.n_in != m or self.linear.n_out != self.n_out:
                raise PreconditionError("layer shape mismatch")
        elif self.variant == "augmented":
            if not (m > self.n_in and self.n_in == self.n_out):
                raise PreconditionError("augmented requires field dim > n_in = n_out")
        elif self.variant == "augmented_with_linear":
            if self.linear is None or m < self.n_in:
                raise PreconditionError("augmented_with_linear requires a layer and dim >= n_in")
            if self.linear.n_in != m or self.linear.n_out != self.n_out:
                raise PreconditionError("layer shape mismatch")
        elif self.variant == "two_layer":
            if self.layer1 is None or self.layer2 is None:
                raise PreconditionError("two_layer requires both layers")
            if self.layer1.n_in != self.n_in or self.layer1.n_out != m:
                raise PreconditionError("inner layer shape mismatch")
            if self.layer2.n_in != m or self.layer2.n_out != self.n_out:
                raise PreconditionError("outer layer shape mismatch")

    @property
    def m(self) -> int:
        return self.field.dim

    def with_config(self, cfg: IntegratorConfig) -> "NodeArchitecture":
        return NodeArchitecture(self.variant, self.field, self.T, self.n_in, self.n_out,
                                self.input_domain, self.linear, self.layer1, self.layer2,
                                cfg, self.closed_form, self.construction, self.basis)


def _augmented_state(arch: NodeArchitecture, x: np.ndarray) -> np.ndarray:
    padded = np.zeros(arch.m)
    padded[:arch.n_in] = x
    return padded


def evaluate_with_defect(arch: NodeArchitecture, x) -> tuple[np.ndarray, float | None]:
    """Evaluate the architecture at ``x``.

    For the ``augmented`` variant the second element is the invariance
    defect: the max-norm of the trailing m - n components of the time-T
    map, which a valid augmented embedding keeps at zero. It is None for
    all other variants.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (arch.n_in,):
        raise PreconditionError(f"expected input of dimension {arch.n_in}")
    if not arch.input_domain.contains(x):
        raise DomainError(f"input {x.tolist()} outside the architecture domain")
    if arch.variant == "basic":
        return time_T_map(arch.field, x, arch.T, arch.cfg), None
    if arch.variant == "with_linear":
        return arch.linear.apply(time_T_map(arch.field, x, arch.T, arch.cfg)), None
    if arch.variant == "augmented":
        h = time_T_map(arch.field, _augmented_state(arch, x), arch.T, arch.cfg)
        defect = float(np.max(np.abs(h[arch.n_in:])))
        return h[:arch.n_in], defect
    if arch.variant == "augmented_with_linear":
        h = time_T_map(arch.field, _augmented_state(arch, x), arch.T, arch.cfg)
        return arch.linear.apply(h), None
    # two_layer
    v = arch.layer1.eval(x)
    h = time_T_map(arch.field, v, arch.T, arch.cfg)
    return arch.layer2.eval(h), None


def evaluate(arch: NodeArchitecture, x) -> np.ndarray:
    return evaluate_with_defect(arch, x)[0]


@dataclass
class VerificationReport:
    """Outcome of comparing an architecture against a target over a grid.

    ``passed`` holds exactly when max_err <= tol; a grid point that fails to
    evaluate sets max_err to infinity and is listed in ``failures``.
    """

    max_err: float
    argmax: np.ndarray | None
    tol: float
    table: list  # (point, error) pairs for points that evaluated
    failures: list  # (point, message) pairs
    defect: float | None = None  # max augmented trailing defect over the grid

    @property
    def passed(self) -> bool:
        return self.max_err <= self.tol

    def table_csv(self) -> str:
        if not self.table and not self.failures:
            return "err\n"
        n = len(self.table[0][0]) if self.table else len(self.failures[0][0])
        lines = [",".join(f"x{i + 1}" for i in range(n)) + ",err"]
        for point, err in self.table:
            lines.append(",".join(f"{v:.17g}" for v in point) + f",{err:.17g}")
        for point, message in self.failures:
            lines.append(",".join(f"{v:.17g}" for v in point) + ",failed")
        return "\n".join(lines) + "\n"

    def to_dict(self, table_csv_path: str | None = None) -> dict:
        return {
            "max_err": self.max_err,
            "argmax": None if self.argmax is None else [float(v) for v in self.argmax],
            "pass": self.passed,
            "tol": self.tol,
            "defect": self.defect,
            "failures": [[list(map(float, p)), msg] for p, msg in self.failures],
            "table_csv": table_csv_path,
        }


def verify_embedding(arch: NodeArchitecture, target: FuncSpec, grid: Grid,
                     tol: float = 1e-6) -> VerificationReport:
    """Max absolute deviation between arch and target over the grid.

    Every grid point is evaluated even after errors; the error profile is a
    diagnostic output, so failures are collected rather than aborting.
    """
    if target.n_in != arch.n_in or target.n_out != arch.n_out:
        raise PreconditionError("target dimensions do not match the architecture")
    max_err = 0.0
    argmax = None
    table = []
    failures = []
    max_defect = None
    for point in grid.points():
        try:
            got, defect = evaluate_with_defect(arch, point)
            want = target.eval(point)
        except (DomainError, IntegrationError) as err:
            failures.append((point, str(err)))
            continue
        e = float(np.max(np.abs(got - want)))
        table.append((point, e))
        if defect is not None:
            max_defect = defect if max_defect is None else max(max_defect, defect)
        if e >= max_err:
            max_err = e
            argmax = point
    if failures:
        max_err = math.inf
    return VerificationReport(max_err, argmax, tol, table, failures, max_defect)


def augment_time(field: VectorFieldSpec, T: float, cfg: IntegratorConfig | None = None
                 ) -> NodeArchitecture:
    """Rewrite a time-dependent field as an autonomous field in one extra
    dimension (rate 1 clock as the last component), projected back by the
    layer A = [I 0].

    Evaluating the result agrees with integrating the original field
    directly; the time variable of the input spec becomes the last state
    coordinate, so component expressions carry over unchanged.
    """
    if field.func.n_in != field.dim + 1:
        raise PreconditionError("augment_time expects a field declared over (h, t)")
    m = field.dim
    from .expr import DomainDim, const
    dims = field.func.domain.dims[:m] + (DomainDim(-math.inf, math.inf, True, True),)
    lifted = FuncSpec(f"{field.func.name}+clock", m + 1, m + 1,
                      field.func.components + (const(1.0),), Domain(dims))
    auto = VectorFieldSpec(m + 1, lifted)
    layer = LinearLayer(np.hstack([np.eye(m), np.zeros((m, 1))]), np.zeros(m))
    input_domain = Domain(field.func.domain.dims[:m])
    return NodeArchitecture("augmented_with_linear", auto, T, m, m, input_domain,
                            linear=layer, cfg=cfg or IntegratorConfig(),
                            construction="augment_time",
                            basis="autonomous reformulation: append a unit-rate clock "
                                  "coordinate and project it away with A = [I 0]")


# -- JSON wire format ----------------------------------------------------------

def field_to_dict(field: VectorFieldSpec) -> dict:
    return {"dim": field.dim, "time_dependent": field.time_dependent,
            "func": funcspec_to_dict(field.func)}


def field_from_dict(d: dict) -> VectorFieldSpec:
    return VectorFieldSpec(int(d["dim"]), funcspec_from_dict(d["func"]),
                           bool(d.get("time_dependent", False)))


def arch_to_dict(arch: NodeArchitecture) -> dict:
    out = {
        "variant": arch.variant,
        "field": field_to_dict(arch.field),
        "T": arch.T,
        "m": arch.m,
        "n_in": arch.n_in,
        "n_out": arch.n_out,
        "input_domain": domain_to_list(arch.input_domain),
        "construction": arch.construction,
    }
    if arch.linear is not None:
        out["linear"] = {"A": arch.linear.A.tolist(), "a": arch.linear.a.tolist()}
    if arch.layer1 is not None:
        out["layer1"] = funcspec_to_dict(arch.layer1)
    if arch.layer2 is not None:
        out["layer2"] = funcspec_to_dict(arch.layer2)
    return out


def arch_from_dict(d: dict, cfg: IntegratorConfig | None = None) -> NodeArchitecture:
    linear = None
    if "linear" in d and d["linear"] is not None:
        linear = LinearLayer(np.array(d["linear"]["A"], dtype=float),
                             np.array(d["linear"]["a"], dtype=float))
    layer1 = funcspec_from_dict(d["layer1"]) if d.get("layer1") else None
    layer2 = funcspec_from_dict(d["layer2"]) if d.get("layer2") else None
    return NodeArchitecture(
        str(d["variant"]), field_from_dict(d["field"]), float(d["T"]),
        int(d["n_in"]), int(d["n_out"]), domain_from_list(d["input_domain"]),
        linear=linear, layer1=layer1, layer2=layer2,
        cfg=cfg or IntegratorConfig(), construction=str(d.get("construction", "")))


def load_architecture(path, cfg: IntegratorConfig | None = None) -> NodeArchitecture:
    with open(path) as fh:
        return arch_from_dict(json.load(fh), cfg)
