from .adam import Adam
from .checkpoint import CheckpointData, load_checkpoint, save_checkpoint
from .mlp import AutoencoderBundle, BatchNorm, Linear, Mlp, MlpSpec, build_bundle
from .tensor import Tensor, concat_rows, row_normalize

__all__ = [
    "Adam",
    "AutoencoderBundle",
    "BatchNorm",
    "CheckpointData",
    "Linear",
    "Mlp",
    "MlpSpec",
    "Tensor",
    "build_bundle",
    "concat_rows",
    "load_checkpoint",
    "row_normalize",
    "save_checkpoint",
]
