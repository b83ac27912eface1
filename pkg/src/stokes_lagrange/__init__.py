"""Boundary control of Stokes flow: carry a fluid blob between two Jordan
curves with controls supported on part of the boundary."""

from .approximation import ApproximationProblem, FitReport, convergence_sweep, discrete_ck_norm, fit
from .control_synthesis import (
    ControlProblem,
    SynthesizedControl,
    control_trace,
    flux,
    synthesize,
)
from .geometry import (
    CollocationSet,
    Domain,
    JordanCurve,
    SigmaArc,
    contains,
    enclosed_holes,
    hausdorff_distance,
    parametric_distance,
    signed_area,
    tube,
)
from .model_flow import advect, build_model_flow, ramp_factor
from .pipeline import (
    BlendedControl,
    RunConfig,
    Trajectory,
    run,
    run_full,
    run_with_initial_condition,
    verify_gronwall,
)
from .stokes_basis import (
    StokesBasis,
    eval_gradient,
    eval_pressure,
    eval_velocity,
    place_sources,
    stokes_residual,
)

__version__ = "0.1.0"

__all__ = [
    "ApproximationProblem",
    "BlendedControl",
    "CollocationSet",
    "ControlProblem",
    "Domain",
    "FitReport",
    "JordanCurve",
    "RunConfig",
    "SigmaArc",
    "StokesBasis",
    "SynthesizedControl",
    "Trajectory",
    "advect",
    "build_model_flow",
    "contains",
    "control_trace",
    "convergence_sweep",
    "discrete_ck_norm",
    "enclosed_holes",
    "eval_gradient",
    "eval_pressure",
    "eval_velocity",
    "fit",
    "flux",
    "hausdorff_distance",
    "parametric_distance",
    "place_sources",
    "ramp_factor",
    "run",
    "run_full",
    "run_with_initial_condition",
    "signed_area",
    "stokes_residual",
    "synthesize",
    "tube",
    "verify_gronwall",
]
