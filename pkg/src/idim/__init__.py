"""Intrinsic-dimension measurement via seeded random subspace training.

Train small models through a frozen seeded projection into the full
parameter space, search for the smallest subspace budget that recovers 90%
of the full-training metric (d90), and run the trend experiments that
relate d90 to pretraining progress, parameter count, and generalization.
"""

from .errors import (BaselineDegenerateError, CapacityError, ConfigError, DataError,
                     IdimError, InvalidDimensionError, NumericError, UndefinedGapError)
from .fwht import fwht_inplace, fwht_rows_inplace, naive_hadamard_multiply, sylvester_hadamard
from .measure import (D90Config, D90Result, default_d_grid, find_d90, generalization_bound,
                      relative_gap, search_smallest_passing, spearman, trajectory, width_sweep)
from .nn import (Batch, LayerSegment, ModelSpec, ParameterVector, evaluate, init_params,
                 loss_and_grad, margin_loss, param_count, reseed_head, transplant_body)
from .projection import (DenseProjection, FastfoodProjection, adjoint, dense_adjoint,
                         dense_project, make_dense, make_fastfood, make_projection, project)
from .rng import SplitMix64, mix
from .subspace import (RunRecord, SubspaceModel, TrainConfig, effective_params, intrinsic_grad,
                       make_subspace_model, model_label, train_full, train_subspace)
from .tasks import Dataset, TaskSpec, TsvSchema, generate, load_tsv

__version__ = "0.1.0"
