"""Python bindings for sprmip.

Train ReLU networks with structured perspective regularization, prune them,
and verify targeted robustness with a big-M MIP solved by branch and bound.
"""

from ._core import (
    BudgetExceeded,
    ConfigError,
    Dataset,
    FormatError,
    InvalidInstance,
    MalformedInput,
    MipModel,
    Mlp,
    OverPrunedLayer,
    accuracy,
    brute_force_verify,
    cross_check,
    encode_adversarial,
    format_arch,
    gen_synthetic,
    init_mlp,
    interval_bounds,
    load_mnist,
    load_model,
    obbt_bounds,
    parse_arch,
    parse_lp,
    prune_pipeline,
    read_dataset_csv,
    save_model,
    solve,
    spr_case,
    spr_grad,
    spr_penalty,
    spr_value,
    threshold_prune,
    train,
    verify,
    write_dataset_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
