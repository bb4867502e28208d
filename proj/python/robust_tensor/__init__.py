"""Robust tensor decomposition: low-rank CP plus sparse corruption."""

from ._core import (
    contract_1,
    contract_2,
    contract_3,
    decompose,
    hard_threshold,
    make_instance,
    relative_error,
    rpca,
    spectral_norm_estimate,
    symmetric_part,
    top_eigenpairs,
)

__all__ = [
    "contract_1",
    "contract_2",
    "contract_3",
    "decompose",
    "hard_threshold",
    "make_instance",
    "relative_error",
    "rpca",
    "spectral_norm_estimate",
    "symmetric_part",
    "top_eigenpairs",
]
