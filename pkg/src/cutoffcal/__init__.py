"""Calibration-audit toolkit: interval-supremum calibration error, post-hoc
calibrators with distribution-free guarantees, two-stage certification, and
decision-theoretic risk-gap evaluation."""

from .core import (ForecastSample, GroupedDataset, SeededRng, ValidationError,
                   group_by_forecast, grouped_from_arrays, load_samples,
                   serialize_samples)
from .metrics import (CutoffEstimate, LipschitzWeights, binned_ece,
                      bv_wce_lower_bound, concentration_radius, cutoff_error,
                      effective_support_size, lipschitz_wce, oracle_ece)
from .calibrate import (CalibratorMap, PlattDivergence, apply_map,
                        default_epsilon, fit_isotonic, fit_modified_platt,
                        fit_platt)
from .decision import (DecisionEvalSet, DiscreteMixture,
                       best_monotone_wrapper_risk, best_wrapper_risk, loss_bd,
                       risk_bd, risk_gaps, risk_st, schervish_loss)
from .certify import CertificationVerdict, certify, min_admissible_c
from .experiments import (SimulationConfig, SimulationRunRecord,
                          make_perturbed_constant, make_separation_example,
                          make_staircase, platt_counterexample, run_simulation)

__version__ = "0.1.0"
