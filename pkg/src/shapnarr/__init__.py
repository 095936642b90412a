"""SHAP attributions for tree ensembles, narrated in plain language."""

__version__ = "0.1.0"
