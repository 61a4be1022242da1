"""Audio-visual self-supervised representation learning: Python surface.

Thin re-export of the compiled core. Feature matrices are numpy float64
arrays; datasets, checkpoints and feature stores live on disk in the same
formats the command-line tool uses, so the two interfaces interoperate.
"""

from ._ssrl import (
    accuracy,
    ccc,
    ccc_loss,
    encode,
    eval_frozen,
    extract_features,
    extract_mfcc_features,
    frame_count,
    jumble,
    log_mel,
    macro_f1,
    mfcc,
    mix_at_snr,
    multitask_loss,
    paired_t_test,
    pretrain,
    synth_dataset,
    synthetic_envelope,
)

__all__ = [
    "accuracy",
    "ccc",
    "ccc_loss",
    "encode",
    "eval_frozen",
    "extract_features",
    "extract_mfcc_features",
    "frame_count",
    "jumble",
    "log_mel",
    "macro_f1",
    "mfcc",
    "mix_at_snr",
    "multitask_loss",
    "paired_t_test",
    "pretrain",
    "synth_dataset",
    "synthetic_envelope",
]
