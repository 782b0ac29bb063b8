"""Backstepping boundary control of 3+1 hyperbolic PDEs with Markov-jumping parameters."""
from .config import ConfigError, build, scenario_paper_v
from .experiment import EnsembleError, EnsembleResult, run_ensemble
from .kernel import KernelConvergenceError, KernelSolution, MeshMismatchError, kernel_residuals, solve_kernels
from .lyapunov import (LyapunovParams, PerturbationFunctions, choose_params, decay_fit, evaluate_V,
                       lemma3_ratio, perturbation_functions)
from .markov import KolmogorovSolution, ModePath, expected_distance, kolmogorov_forward, sample_path
from .model import EvaluationError, FieldState, Grid, MarkovSpec, Mode, ModelError, Profile, mode_distance, mode_norm
from .pde import SimConfig, SimulationDiverged, Trajectory, simulate
from .transform import TargetState, apply_inverse, apply_transform, control_input

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EnsembleError", "EnsembleResult", "EvaluationError", "FieldState", "Grid",
    "KernelConvergenceError", "KernelSolution", "KolmogorovSolution", "LyapunovParams", "MarkovSpec",
    "MeshMismatchError", "Mode", "ModePath", "ModelError", "PerturbationFunctions", "Profile", "SimConfig",
    "SimulationDiverged", "TargetState", "Trajectory", "apply_inverse", "apply_transform", "build",
    "choose_params", "control_input", "decay_fit", "evaluate_V", "expected_distance", "kernel_residuals",
    "kolmogorov_forward", "lemma3_ratio", "mode_distance", "mode_norm", "perturbation_functions",
    "run_ensemble", "sample_path", "scenario_paper_v", "simulate", "solve_kernels",
]
