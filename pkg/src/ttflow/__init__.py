"""Low-rank time integration of tensor differential equations on tensor-train manifolds."""

from .dense import frobenius_norm, relative_error, tensorize, unfold
from .tt import (
    TensorTrain,
    add,
    contract_to_dense,
    cross_interpolant,
    cross_interpolant_qr,
    hadamard,
    load_checkpoint,
    orthogonalize,
    orthogonalize_family,
    round_tt,
    save_checkpoint,
    scale,
    subtensor,
    tt_svd,
)
from .sampling import NestedIndexSets, deim, deim_oversampled, tt_cross_deim
from .integrators import RankPolicy, StepperConfig, integrate
from .tangent import build_frame, interpolatory_project, orthogonal_project

__version__ = "0.1.0"
