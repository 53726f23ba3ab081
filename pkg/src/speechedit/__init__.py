"""Text-based speech editing: regenerate only the edited region of a
recording's mel-spectrogram, conditioned on the surrounding original frames."""

from .acoustic import AcousticModel, DurationModel, ModelConfig
from .dsp import (
    GriffinLimVocoder,
    MCEPSequence,
    MelSpectrogram,
    Waveform,
    griffin_lim,
    mcep,
    mel_spectrogram,
)
from .editing import (
    EditResult,
    RegionSplit,
    SpeechEditor,
    delete_region,
    fuse,
    partial_inference,
    refine_durations,
    select_fusion_point,
)
from .errors import SpeechEditError
from .evaluation import dtw, masked_reconstruction, mcd
from .frontend import Alignment, EditRequest, Lexicon, PhoneSequence, g2p

__version__ = "0.1.0"

__all__ = [
    "AcousticModel",
    "Alignment",
    "DurationModel",
    "EditRequest",
    "EditResult",
    "GriffinLimVocoder",
    "Lexicon",
    "MCEPSequence",
    "MelSpectrogram",
    "ModelConfig",
    "PhoneSequence",
    "RegionSplit",
    "SpeechEditor",
    "SpeechEditError",
    "Waveform",
    "delete_region",
    "dtw",
    "fuse",
    "g2p",
    "griffin_lim",
    "masked_reconstruction",
    "mcd",
    "mcep",
    "mel_spectrogram",
    "partial_inference",
    "refine_durations",
    "select_fusion_point",
]
