"""Workbench for exact embeddings of maps as time-T maps of neural-ODE
architectures: explicit constructions, numerical verification, and
obstruction-based non-embeddability diagnosis."""

__version__ = "0.1.0"

from .errors import (DomainError, InconclusiveError, IntegrationError,
                     OdembedError, ParseError, PreconditionError)
from .expr import (Domain, DomainDim, Expr, FuncSpec, Grid, box, diff,
                   eval_expr, funcspec_from_dict, funcspec_to_dict, gradient,
                   grid_1d, hessian, hessian_matrix, interval, jacobian,
                   jacobian_matrix, parse_expr, print_expr, reals, scalar_spec)
from .ode import (BLEW_UP, COMPLETED, STEP_LIMIT, IntegratorConfig,
                  MonotoneReport, Trajectory, VectorFieldSpec,
                  autonomous_field, check_monotone_1d, check_translation,
                  integrate, time_T_map)
from .architectures import (LinearLayer, NodeArchitecture, VerificationReport,
                            arch_from_dict, arch_to_dict, augment_time,
                            evaluate, evaluate_with_defect, verify_embedding)
from .constructions import (CONSTRUCTIONS, closed_form_solution,
                            construct_linear, construct_moebius,
                            construct_monomial, construct_negation,
                            construct_polynomial, construct_universal)
from .series import PowerSeries
from .julia import (MonomialCertificate, PrincipalSolutionResult, RFunction,
                    ResidualReport, abel_residual, iterative_logarithm,
                    jabotinsky_flow, julia_residual, julia_series_residual,
                    monomial_series_solution, principal_solution_limit)
from .morse import (CriticalPoint, DiagnosisReport, antipodal_point, ck_norm,
                    classify_critical, diagnose, find_critical_points,
                    morse_normal_form_1d, morseify, separation_obstruction_1d,
                    topological_chart_1d)
from .suspension import (MappingTorus, TorusPoint, automorphism, canonicalize,
                         suspension_flow, torus_trajectory_csv)
