"""Risk measures defined by acceptance sets, security spaces and prices.

Positions live on finite spaces or truncated windows of the naturals and
integers, with declared tail behaviour beyond the window.
"""
from .measure_core import (GeneralizedMeasure, RandomVariable, SampleSpace, Tail, Truncation, integrate,
                           measure_relations, mix, truncate)
from .regimes import (AVaR, Entropic, IndexedDual, Intersection, LinearDual, PricingFunctional, Regime,
                      SecuritySpace, normalize_regime, validate_regime)
from .solver import RiskReport, avar_eval, dual_risk, entropic_eval, primal_risk, sigma_A
from .reference import (DiagnosticReport, consistent_family, continuity_above_diagnostic, pricing_consistent,
                        raw_family, sensitivity_check, strong_reference_check, weak_reference)
from .minkowski import Grids, MembershipReport, classify, gauge_norm, norm_equivalence_constants, rho_abs
from .extend import ExtensionReport, eta, extensions, regularity_check, rho_tilde, tail_continuity_test, xi
from .subgrad import SubgradientReport, escape_diagnostic, regular_projection_check, subgradient

__version__ = "0.1.0"
