"""Time-periodic wake flows around a moving body.

Numerical core for the whole-space periodic problem: orthogonal evolution
matrices of the body frame, the unsteady Stokes/Oseen fundamental solution,
anisotropic wake-weighted norms, volume-potential operators, and a Picard
solver for v = Sg + Lambda(v (x) v) with wake-decay verification.
"""

from .forcing import (
    CutoffProfile,
    ForcingSample,
    SyntheticForcing,
    assemble_forcing,
    lift_field,
    newtonian_potential_gradient,
    synthetic_g,
)
from .kernels import (
    NonautonomousKernelValue,
    StokesKernelValue,
    grad_stokes_fundamental,
    kernel_K,
    stokes_fundamental,
    verify_kernel_decay,
)
from .oseen_bounds import (
    BoundCheckResult,
    check_auxi1,
    check_auxi2,
    check_deu2,
    check_deu_ineq,
    deuring_F,
    int_y_identity,
    oseen_time_integral,
)
from .rigid_motion import (
    RigidMotionSpec,
    RotationMatrix,
    RotationPath,
    WakeReport,
    candidate_zeta,
    evolution_matrix,
    wake_constant,
    wake_drift,
)
from .weights import (
    FieldGrid,
    WeightedField,
    comparability_constant,
    weight,
    weighted_norm,
)

__version__ = "0.1.0"
