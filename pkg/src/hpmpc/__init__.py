"""Hierarchical mixed-integer MPC for a heat-pump-heated house."""
