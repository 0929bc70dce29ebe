"""Numerical laboratory for multiresolution hash encodings.

Measures the point response (PSF) that hash-grid models actually learn,
checks it against closed-form kernel theory, quantifies hash-collision
noise, and plans hyperparameters from a target response width.
"""

__version__ = "0.1.0"

from .encoding import (
    CollisionAudit,
    EncodingConfig,
    HashGrid,
    HashGridEncoder,
    Rotation,
    audit_collisions,
    build_grid,
    encode,
    load_grid,
    save_grid,
)
from .experiments import (
    CollisionSweepResult,
    DipoleResult,
    PointPSF,
    TwoPointResult,
    collision_sweep,
    dipole_experiment,
    jittered_center,
    measure_point_psf,
    train_point_model,
    two_point_experiment,
)
from .kernels import (
    KernelSpec,
    LevelSchedule,
    SpectralWeights,
    anisotropy_ratio,
    bias_broadening,
    bspline,
    composite_fwhm,
    composite_psf,
    kernel_fwhm,
    log_profile,
    power_law_weights,
    tent,
)
from .metrology import (
    PSFMap,
    anisotropy_profile,
    anisotropy_ratio_at,
    broadening_factor,
    fwhm_along,
    fwhm_fan,
    sample_psf,
    sample_ray,
    snr_db,
)
from .planner import (
    PlanRequest,
    PlanResult,
    UnachievableTargetError,
    n_avg,
    plan_report,
    solve_growth_factor,
)
from .training import (
    Constraint,
    DecoderSpec,
    FieldModel,
    FieldRegressor,
    ImageTrainResult,
    OptimizerSpec,
    TrainingDiverged,
    forward,
    gradient_check,
    init_model,
    psnr_db,
    train_batched,
    train_image,
    train_points,
)

__all__ = [name for name in dir() if not name.startswith("_")]
