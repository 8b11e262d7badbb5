"""Shared random-forest builder used by importance scoring and classification."""

from __future__ import annotations

from sklearn.ensemble import RandomForestClassifier


def build_forest(trees: int = 500, max_depth: int | None = None,
                 max_features="sqrt", seed: int = 0,
                 bootstrap: bool = True) -> RandomForestClassifier:
    """Gini-impurity forest with a fixed seed; single-threaded for determinism."""
    return RandomForestClassifier(
        n_estimators=trees,
        criterion="gini",
        max_depth=max_depth,
        max_features=max_features,
        bootstrap=bootstrap,
        random_state=seed,
        n_jobs=1,
    )
