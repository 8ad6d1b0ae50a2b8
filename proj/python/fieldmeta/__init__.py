"""Meta-learned neural fields with gradient-norm context pruning."""

from ._fieldmeta import (
    Activation,
    Head,
    Hyper,
    MetaState,
    ModelSpec,
    adapt,
    fit_scratch,
    forward,
    grid_coords,
    init_params,
    load_signal,
    load_state,
    metatrain,
    psnr,
    score,
    spearman,
    synth,
    topk,
    write_synth_dataset,
)

__all__ = [
    "Activation",
    "Head",
    "Hyper",
    "MetaState",
    "ModelSpec",
    "adapt",
    "fit_scratch",
    "forward",
    "grid_coords",
    "init_params",
    "load_signal",
    "load_state",
    "metatrain",
    "psnr",
    "score",
    "spearman",
    "synth",
    "topk",
    "write_synth_dataset",
]
