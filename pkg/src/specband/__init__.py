"""Frequency-band slicing and two-branch training for single-domain generalisation."""

from .filters import BandSpec, FilterBank, build_bank, default_bands, uniform_bands
from .spectrum import SymmetryWarning, band_slice, band_slices, dft2, idft2
from .data import Dataset, SynthConfig, desk_bands, generate_synth
from .training import RunRecord, evaluate, make_slices, train_dual, train_erm

__version__ = "0.1.0"

__all__ = [
    "BandSpec", "Dataset", "FilterBank", "RunRecord", "SymmetryWarning", "SynthConfig",
    "band_slice", "band_slices", "build_bank", "default_bands", "desk_bands", "dft2",
    "evaluate", "generate_synth", "idft2", "make_slices", "train_dual", "train_erm",
    "uniform_bands",
]
