"""Behavioral-clinical phenotype discovery from diabetes self-monitoring data.

Meals are clustered by average-linkage hierarchical clustering on one of four
feature sets, the cluster count is chosen by the Calinski-Harabasz criterion,
and the clusters are compared with expert observations written as Boolean
queries.
"""

__version__ = "0.1.0"

from .core import DISCARDED, UNMATCHED, Dataset, FeatureSetKind, Meal, MealType, Partition, derive_features
from .errors import PhenoclustError

__all__ = [
    "DISCARDED",
    "UNMATCHED",
    "Dataset",
    "FeatureSetKind",
    "Meal",
    "MealType",
    "Partition",
    "PhenoclustError",
    "derive_features",
]
