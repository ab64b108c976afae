"""Iterative hybrid oversampling for extremely imbalanced binary classification."""
