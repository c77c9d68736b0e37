"""Structured perfect Bayesian equilibria of finite-type dynamic games."""

from ._core import (
    ArtifactCorrupt,
    ArtifactMismatch,
    GameSpec,
    IoError,
    Solution,
    SpecParseError,
    SpecValidationError,
    coordination_benchmarks,
    joint_action,
    simulate,
    solve,
    stage_equilibrium,
    update_marginal,
    verify,
)

__all__ = [
    "ArtifactCorrupt",
    "ArtifactMismatch",
    "GameSpec",
    "IoError",
    "Solution",
    "SpecParseError",
    "SpecValidationError",
    "coordination_benchmarks",
    "joint_action",
    "simulate",
    "solve",
    "stage_equilibrium",
    "update_marginal",
    "verify",
]
