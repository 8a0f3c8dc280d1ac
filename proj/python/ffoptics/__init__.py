from ._core import (
    FFOpticsError,
    OpticalTransform,
    RidgeModel,
    config_keys,
    conv2d,
    default_alpha_grid,
    embed_label,
    estimate_flops,
    ff_pair_loss,
    fit_ridge,
    goodness,
    l2_normalize_rows,
    relu,
    run_experiment,
    sigmoid,
    softplus,
    sweep_regularization,
    train_ff_layer,
)

__all__ = [
    "FFOpticsError",
    "OpticalTransform",
    "RidgeModel",
    "config_keys",
    "conv2d",
    "default_alpha_grid",
    "embed_label",
    "estimate_flops",
    "ff_pair_loss",
    "fit_ridge",
    "goodness",
    "l2_normalize_rows",
    "relu",
    "run_experiment",
    "sigmoid",
    "softplus",
    "sweep_regularization",
    "train_ff_layer",
]
