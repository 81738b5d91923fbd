"""lucidtab: explainable tabular classification at desk scale.

A from-scratch pipeline for the 569-case breast-cancer diagnostic task:
CSV ingestion, leak-free preprocessing, feature selection (chi-square,
RFE, PCA), a small deterministic neural-network engine (MLP and 1-D CNN),
cross-validated hyperparameter search, evaluation metrics, and three
attribution methods (exact/kernel Shapley, local surrogates, permutation
importance), all orchestrated by a reproducible CLI.
"""

__version__ = "0.1.0"
