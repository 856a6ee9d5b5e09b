"""Label-dependence-aware sequence generation for multi-level label prediction."""
