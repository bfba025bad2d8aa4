"""
Corpus Module
Waveform I/O, framing, frequency warping and the synthetic warped-speaker corpus
"""

from .wav_io import Waveform, read_wav, write_wav
from .framing import frame_signal
from .warping import warp_alpha, warp_knee
from .generator import (
    ClassPrototype,
    SpeakerSpec,
    CorpusSpec,
    FrameExample,
    FrameSet,
    CorpusSplits,
    gen_corpus,
    write_corpus,
    load_corpus,
    default_mismatch_spec,
    formant_prototype,
)

__all__ = [
    'Waveform',
    'read_wav',
    'write_wav',
    'frame_signal',
    'warp_alpha',
    'warp_knee',
    'ClassPrototype',
    'SpeakerSpec',
    'CorpusSpec',
    'FrameExample',
    'FrameSet',
    'CorpusSplits',
    'gen_corpus',
    'write_corpus',
    'load_corpus',
    'default_mismatch_spec',
    'formant_prototype',
]
