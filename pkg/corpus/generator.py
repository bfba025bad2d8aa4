"""
Synthetic Corpus Generator
Warped-speaker corpus of labelled sinusoidal "spectral prototype" utterances
"""

import json
import logging
import os
import zlib
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .framing import DEFAULT_HOP_S, DEFAULT_WIN_S, frame_signal
from .wav_io import Waveform, read_wav, write_wav
from .warping import warp_alpha

logger = logging.getLogger(__name__)

DOMAINS = ('base', 'target')
SPLITS = ('train', 'dev', 'adapt', 'test')
INDEX_FILE = 'index.json'
SPEC_FILE = 'corpus_spec.json'


@dataclass(frozen=True)
class ClassPrototype:
    """Component centre frequencies (Hz) with their amplitudes"""
    frequencies: Tuple[float, ...]
    amplitudes: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'frequencies', tuple(float(f) for f in self.frequencies))
        object.__setattr__(self, 'amplitudes', tuple(float(a) for a in self.amplitudes))
        if not self.frequencies:
            raise ValueError("Class prototype needs at least one component")
        if len(self.frequencies) != len(self.amplitudes):
            raise ValueError(f"Prototype has {len(self.frequencies)} frequencies but "
                             f"{len(self.amplitudes)} amplitudes")

    def to_dict(self) -> Dict:
        return {'frequencies': list(self.frequencies), 'amplitudes': list(self.amplitudes)}


@dataclass(frozen=True)
class SpeakerSpec:
    speaker_id: str
    alpha: float
    loudness: float = 1.0
    domain: str = 'base'

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"Speaker {self.speaker_id}: warp factor must be positive, got {self.alpha}")
        if self.domain not in DOMAINS:
            raise ValueError(f"Speaker {self.speaker_id}: unknown domain '{self.domain}'")

    def to_dict(self) -> Dict:
        return {'speaker_id': self.speaker_id, 'alpha': self.alpha,
                'loudness': self.loudness, 'domain': self.domain}


@dataclass(frozen=True)
class CorpusSpec:
    """
    Synthetic corpus description

    snr_db of None means no noise. Base-domain speakers feed train (and their last
    `heldout_utterances` feed dev); target-domain speakers feed adapt (their first
    `adapt_utterances`) and test (the rest).
    """
    n_classes: int
    prototypes: Tuple[ClassPrototype, ...]
    speakers: Tuple[SpeakerSpec, ...]
    utterances_per_speaker: int
    duration_s: float
    snr_db: Optional[float]
    seed: int
    sample_rate: int = 16000
    win_s: float = DEFAULT_WIN_S
    hop_s: float = DEFAULT_HOP_S
    heldout_utterances: int = 1
    adapt_utterances: int = 2

    def __post_init__(self):
        object.__setattr__(self, 'prototypes', tuple(self.prototypes))
        object.__setattr__(self, 'speakers', tuple(self.speakers))
        if not self.prototypes or not self.speakers or self.utterances_per_speaker < 1:
            raise ValueError("Corpus spec is empty: needs prototypes, speakers and utterances")
        if self.n_classes != len(self.prototypes):
            raise ValueError(f"n_classes={self.n_classes} but {len(self.prototypes)} prototypes given")
        ids = [s.speaker_id for s in self.speakers]
        if len(set(ids)) != len(ids):
            raise ValueError("Speaker ids must be unique")
        max_freq = max(max(p.frequencies) for p in self.prototypes)
        max_alpha = max(s.alpha for s in self.speakers)
        if min(min(p.frequencies) for p in self.prototypes) < 0:
            raise ValueError("Component frequencies must be non-negative")
        if max_freq * max_alpha >= self.sample_rate / 2.0:
            raise ValueError(f"Aliasing: component {max_freq} Hz x alpha {max_alpha} "
                             f">= Nyquist {self.sample_rate / 2.0} Hz")
        if int(round(self.duration_s * self.sample_rate)) < int(round(self.win_s * self.sample_rate)):
            raise ValueError(f"Utterances of {self.duration_s}s are shorter than one {self.win_s}s frame")

    @property
    def frame_samples(self) -> int:
        return int(round(self.win_s * self.sample_rate))

    def to_dict(self) -> Dict:
        return {
            'n_classes': self.n_classes,
            'prototypes': [p.to_dict() for p in self.prototypes],
            'speakers': [s.to_dict() for s in self.speakers],
            'utterances_per_speaker': self.utterances_per_speaker,
            'duration_s': self.duration_s,
            'snr_db': self.snr_db,
            'seed': self.seed,
            'sample_rate': self.sample_rate,
            'win_s': self.win_s,
            'hop_s': self.hop_s,
            'heldout_utterances': self.heldout_utterances,
            'adapt_utterances': self.adapt_utterances,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'CorpusSpec':
        try:
            return cls(
                n_classes=int(data['n_classes']),
                prototypes=tuple(ClassPrototype(p['frequencies'], p['amplitudes']) for p in data['prototypes']),
                speakers=tuple(SpeakerSpec(s['speaker_id'], float(s['alpha']), float(s.get('loudness', 1.0)),
                                           s.get('domain', 'base')) for s in data['speakers']),
                utterances_per_speaker=int(data['utterances_per_speaker']),
                duration_s=float(data['duration_s']),
                snr_db=None if data.get('snr_db') is None else float(data['snr_db']),
                seed=int(data['seed']),
                sample_rate=int(data.get('sample_rate', 16000)),
                win_s=float(data.get('win_s', DEFAULT_WIN_S)),
                hop_s=float(data.get('hop_s', DEFAULT_HOP_S)),
                heldout_utterances=int(data.get('heldout_utterances', 1)),
                adapt_utterances=int(data.get('adapt_utterances', 2)),
            )
        except KeyError as e:
            raise ValueError(f"Corpus spec missing field: {e}")

    @classmethod
    def load(cls, path: str) -> 'CorpusSpec':
        if not os.path.exists(path):
            raise FileNotFoundError(f"Corpus spec not found: {path}")
        with open(path, 'r') as f:
            return cls.from_dict(json.load(f))

    def save(self, path: str):
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)


@dataclass(frozen=True)
class FrameExample:
    frame: np.ndarray
    label: int
    speaker_id: str
    utterance_id: str


@dataclass
class FrameSet:
    """Column-oriented collection of labelled frames"""
    frames: np.ndarray
    labels: np.ndarray
    speaker_ids: np.ndarray
    utterance_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[FrameExample]:
        for i in range(len(self)):
            yield FrameExample(self.frames[i], int(self.labels[i]),
                               str(self.speaker_ids[i]), str(self.utterance_ids[i]))

    @classmethod
    def empty(cls, frame_samples: int) -> 'FrameSet':
        return cls(np.zeros((0, frame_samples)), np.zeros(0, dtype=np.int64),
                   np.array([], dtype=object), np.array([], dtype=object))

    @classmethod
    def concat(cls, parts: Sequence['FrameSet'], frame_samples: int) -> 'FrameSet':
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(frame_samples)
        return cls(np.concatenate([p.frames for p in parts]),
                   np.concatenate([p.labels for p in parts]),
                   np.concatenate([p.speaker_ids for p in parts]),
                   np.concatenate([p.utterance_ids for p in parts]))

    def subset(self, mask: np.ndarray) -> 'FrameSet':
        return FrameSet(self.frames[mask], self.labels[mask],
                        self.speaker_ids[mask], self.utterance_ids[mask])

    def for_speaker(self, speaker_id: str) -> 'FrameSet':
        return self.subset(self.speaker_ids == speaker_id)

    def speakers(self) -> List[str]:
        return sorted(set(str(s) for s in self.speaker_ids))

    def utterances(self) -> List[str]:
        """Utterance ids in first-appearance order"""
        seen: Dict[str, None] = {}
        for u in self.utterance_ids:
            seen.setdefault(str(u), None)
        return list(seen)

    def first_utterances(self, count: int) -> 'FrameSet':
        keep = set(self.utterances()[:count])
        return self.subset(np.array([str(u) in keep for u in self.utterance_ids], dtype=bool))


@dataclass
class CorpusSplits:
    spec: CorpusSpec
    train: FrameSet
    dev: FrameSet
    adapt: FrameSet
    test: FrameSet
    index: List[Dict] = field(default_factory=list)

    def split(self, name: str) -> FrameSet:
        if name not in SPLITS:
            raise ValueError(f"Unknown split '{name}' (expected one of {SPLITS})")
        return getattr(self, name)

    def speakers(self, domain: str) -> List[str]:
        return [s.speaker_id for s in self.spec.speakers if s.domain == domain]


def utterance_id(speaker_id: str, u: int) -> str:
    return f"{speaker_id}_u{u:03d}"


def utterance_split(spec: CorpusSpec, speaker: SpeakerSpec, u: int) -> str:
    if speaker.domain == 'base':
        return 'dev' if u >= spec.utterances_per_speaker - spec.heldout_utterances else 'train'
    return 'adapt' if u < spec.adapt_utterances else 'test'


def utterance_rng(spec: CorpusSpec, speaker_id: str, u: int) -> np.random.Generator:
    """Per-utterance stream derived from (seed, speaker_id, utterance index)"""
    return np.random.default_rng(np.random.SeedSequence([spec.seed, zlib.crc32(speaker_id.encode()), u]))


def synthesize_utterance(spec: CorpusSpec, speaker: SpeakerSpec, u: int) -> Tuple[Waveform, int]:
    """
    Sum of warped sinusoids with random phases plus white noise, scaled by loudness

    Returns:
        (waveform, class label)
    """
    label = (u + spec.speakers.index(speaker)) % spec.n_classes
    prototype = spec.prototypes[label]
    rng = utterance_rng(spec, speaker.speaker_id, u)
    n_samples = int(round(spec.duration_s * spec.sample_rate))
    t = np.arange(n_samples) / spec.sample_rate

    freqs = warp_alpha(np.array(prototype.frequencies), speaker.alpha, spec.sample_rate / 2.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(freqs))
    clean = np.zeros(n_samples)
    for freq, amp, phase in zip(np.atleast_1d(freqs), prototype.amplitudes, phases):
        clean += amp * np.sin(2.0 * np.pi * freq * t + phase)

    if spec.snr_db is not None:
        noise_power = np.mean(clean ** 2) / (10.0 ** (spec.snr_db / 10.0))
        clean = clean + rng.standard_normal(n_samples) * np.sqrt(noise_power)

    samples = speaker.loudness * clean
    return Waveform(samples, spec.sample_rate, {'speaker_id': speaker.speaker_id, 'alpha': speaker.alpha}), label


def _frames_for(spec: CorpusSpec, waveform: Waveform, label: int, speaker_id: str, utt: str) -> FrameSet:
    frames = frame_signal(waveform, spec.win_s, spec.hop_s)
    n = len(frames)
    return FrameSet(frames, np.full(n, label, dtype=np.int64),
                    np.array([speaker_id] * n, dtype=object), np.array([utt] * n, dtype=object))


def gen_corpus(spec: CorpusSpec) -> CorpusSplits:
    """
    Generate all utterances and frame them into train/dev/adapt/test splits

    Deterministic given the spec; utterances are independent of generation order.
    """
    parts: Dict[str, List[FrameSet]] = {name: [] for name in SPLITS}
    index = []
    for speaker in spec.speakers:
        for u in range(spec.utterances_per_speaker):
            waveform, label = synthesize_utterance(spec, speaker, u)
            utt = utterance_id(speaker.speaker_id, u)
            split = utterance_split(spec, speaker, u)
            parts[split].append(_frames_for(spec, waveform, label, speaker.speaker_id, utt))
            index.append({'utterance_id': utt, 'speaker_id': speaker.speaker_id, 'alpha': speaker.alpha,
                          'class': label, 'domain': speaker.domain, 'split': split})

    splits = CorpusSplits(spec, *(FrameSet.concat(parts[name], spec.frame_samples) for name in SPLITS),
                          index=index)
    logger.info("Generated corpus: " + ", ".join(f"{name}={len(splits.split(name))}" for name in SPLITS)
                + " frames")
    return splits


def write_corpus(spec: CorpusSpec, out_dir: str) -> str:
    """
    Write one WAV per utterance plus index.json and corpus_spec.json

    Returns:
        Path of the index file
    """
    os.makedirs(os.path.join(out_dir, 'wav'), exist_ok=True)
    index = []
    for speaker in spec.speakers:
        for u in range(spec.utterances_per_speaker):
            waveform, label = synthesize_utterance(spec, speaker, u)
            utt = utterance_id(speaker.speaker_id, u)
            rel_path = os.path.join('wav', f'{utt}.wav')
            write_wav(os.path.join(out_dir, rel_path), waveform)
            index.append({'utterance_id': utt, 'speaker_id': speaker.speaker_id, 'alpha': speaker.alpha,
                          'class': label, 'path': rel_path, 'domain': speaker.domain,
                          'split': utterance_split(spec, speaker, u)})

    spec.save(os.path.join(out_dir, SPEC_FILE))
    index_path = os.path.join(out_dir, INDEX_FILE)
    with open(index_path, 'w') as f:
        json.dump(index, f, indent=2, sort_keys=True)
    logger.info(f"Wrote {len(index)} utterances to {out_dir}")
    return index_path


def load_corpus(corpus_dir: str) -> CorpusSplits:
    """Re-frame a corpus written by write_corpus from its WAV files"""
    spec = CorpusSpec.load(os.path.join(corpus_dir, SPEC_FILE))
    index_path = os.path.join(corpus_dir, INDEX_FILE)
    if not os.path.exists(index_path):
        raise FileNotFoundError(f"Corpus index not found: {index_path}")
    with open(index_path, 'r') as f:
        index = json.load(f)

    parts: Dict[str, List[FrameSet]] = {name: [] for name in SPLITS}
    for entry in index:
        if entry['split'] not in parts:
            raise ValueError(f"Unknown split '{entry['split']}' for {entry['utterance_id']}")
        waveform = read_wav(os.path.join(corpus_dir, entry['path']), spec.sample_rate)
        parts[entry['split']].append(_frames_for(spec, waveform, int(entry['class']),
                                                 entry['speaker_id'], entry['utterance_id']))
    return CorpusSplits(spec, *(FrameSet.concat(parts[name], spec.frame_samples) for name in SPLITS),
                        index=index)


def formant_prototype(formants_hz: Sequence[float], f0_hz: float, f_max_hz: float,
                      bandwidth: float = 0.12, floor: float = 0.02, rms: float = 0.15) -> ClassPrototype:
    """
    Harmonic comb under a formant envelope

    Args:
        formants_hz: Envelope peak frequencies
        f0_hz: Comb spacing (fundamental)
        f_max_hz: Highest harmonic kept
        bandwidth: Peak width in natural-log frequency units
        floor: Envelope level between peaks
        rms: RMS of the resulting clean signal

    Returns:
        ClassPrototype with one component per harmonic
    """
    if f0_hz <= 0 or f_max_hz < f0_hz:
        raise ValueError(f"Need 0 < f0 <= f_max, got f0={f0_hz}, f_max={f_max_hz}")
    harmonics = f0_hz * np.arange(1, int(f_max_hz // f0_hz) + 1)
    envelope = floor + sum(np.exp(-0.5 * (np.log(harmonics / f) / bandwidth) ** 2) for f in formants_hz)
    amplitudes = envelope * rms * np.sqrt(2.0 / np.sum(envelope ** 2))
    return ClassPrototype(tuple(harmonics), tuple(amplitudes))


def default_mismatch_spec(seed: int = 7) -> CorpusSpec:
    """
    Base speakers with alpha in [0.95, 1.05] against target speakers at alpha 1.25

    Four formant classes on a 125 Hz comb up to 4.25 kHz. Class formants are spaced
    by a factor of 1.25, so an unadapted model hears target class c as class c+1.
    The top harmonic warped by 1.25 stays under the target warp knee.
    """
    prototypes = tuple(formant_prototype(tuple(f * 1.25 ** c for f in (300.0, 900.0, 2100.0)), 125.0, 4250.0)
                       for c in range(4))
    base = [SpeakerSpec(f'base{i}', float(a), 1.0, 'base')
            for i, a in enumerate(np.linspace(0.95, 1.05, 6))]
    target = [SpeakerSpec(f'target{i}', 1.25, 1.0, 'target') for i in range(4)]
    return CorpusSpec(n_classes=4, prototypes=prototypes, speakers=tuple(base + target),
                      utterances_per_speaker=24, duration_s=0.5, snr_db=30.0, seed=seed,
                      win_s=0.2, hop_s=0.04, heldout_utterances=4, adapt_utterances=20)
