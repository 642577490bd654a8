"""Estimate classifier accuracies and build ensembles from unlabeled predictions."""

__version__ = "0.1.0"

from .accuracies import AccuracyEstimates, clip_accuracies, psi_eta_from_b
from .data import (MultiPredictionMatrix, PredictionMatrix, ValidationReport, parse_multiclass_csv,
                   parse_prediction_csv, serialize, validate)
from .ensemble import (EmResult, EnsemblePrediction, balanced_accuracy_score, em_refine,
                       isml_predict, majority_vote, ml_predict, sml_predict,
                       unsupervised_accuracies)
from .imbalance import (ImbalanceEstimate, alpha_least_squares, b_from_alpha,
                        estimate_b_likelihood, estimate_b_tensor, restricted_log_likelihood)
from .moments import (MomentSet, population_moments, sample_covariance, sample_means,
                      sample_moments, sample_tensor)
from .multiclass import (ConfusionSet, MulticlassEstimates, ambiguity_witness, binarize,
                         estimate_probs_and_diagonals, population_binary_stats)
from .spectral import SpectralVector, estimate_v, resolve_sign
