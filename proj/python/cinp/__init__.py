"""Contrastive image/network pretraining on synthetic cohorts.

Thin wrapper over the C++ core. Configs are plain dicts (the same schema as
the CLI's JSON configs); bulk data comes back as numpy arrays.
"""

from ._core import (
    Checkpoint,
    CinpError,
    auc,
    bold_to_fcn,
    build_reference_set,
    desk_config,
    embed,
    evaluate,
    export_cohort,
    gen_cohort,
    import_cohort,
    linear_probe_accuracy,
    load_checkpoint,
    load_config,
    mask_indices,
    metrics,
    paper_config,
    pretrain,
    prompt_classify,
    split_dataset,
    validate_config,
)

__all__ = [
    "Checkpoint",
    "CinpError",
    "auc",
    "bold_to_fcn",
    "build_reference_set",
    "desk_config",
    "embed",
    "evaluate",
    "export_cohort",
    "gen_cohort",
    "import_cohort",
    "linear_probe_accuracy",
    "load_checkpoint",
    "load_config",
    "mask_indices",
    "metrics",
    "paper_config",
    "pretrain",
    "prompt_classify",
    "split_dataset",
    "validate_config",
]
