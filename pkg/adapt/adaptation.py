"""
Adaptation Module
Adaptation modes, trainable-parameter selection and per-speaker adaptation runs
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import GroupShuffleSplit

from corpus.generator import CorpusSplits, FrameSet
from nnet.model import LHUC_SITES, Model
from nnet.trainer import Trainer, evaluate_model, metrics_record
from optim.adam import ParamGroup
from .lhuc import attach_lhuc

logger = logging.getLogger(__name__)

BATCHNORM_POLICIES = ('frozen', 'update_stats')


class AdaptMode(Enum):
    """Which parameter groups adapt"""
    SINC = "Sinc"
    LHUC0 = "LHUC0"
    SINC_LHUC0 = "SincLHUC0"
    LHUC1 = "LHUC1"
    SINC_LHUC1 = "SincLHUC1"
    ALL_MINUS_SINC = "AllMinusSinc"
    ALL = "All"

    @classmethod
    def parse(cls, label: str) -> 'AdaptMode':
        """Accepts 'SincLHUC1', 'Sinc+LHUC1', 'ALL-Sinc', 'allminussinc', ..."""
        key = str(label).strip().lower().replace('+', '').replace('-', 'minus').replace('_', '')
        for mode in cls:
            if mode.value.lower() == key:
                return mode
        raise ValueError(f"Unknown adaptation mode '{label}' (expected one of {[m.value for m in cls]})")

    @property
    def lhuc_sites(self) -> List[str]:
        """LHUC sites this mode needs attached"""
        return {
            AdaptMode.LHUC0: ['sinc_output'],
            AdaptMode.SINC_LHUC0: ['sinc_output'],
            AdaptMode.LHUC1: ['conv1_output'],
            AdaptMode.SINC_LHUC1: ['conv1_output'],
        }.get(self, [])


@dataclass
class AdaptConfig:
    mode: AdaptMode = AdaptMode.SINC
    epochs: int = 1
    batch_size: int = 256
    learning_rate: float = 0.0015
    lhuc_learning_rate: float = 0.8
    lhuc_multiplier: float = 500.0
    batchnorm_policy: str = 'frozen'
    adapt_utterances: Optional[int] = None
    heldout_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.mode, AdaptMode):
            self.mode = AdaptMode.parse(self.mode)
        if self.epochs < 0:
            raise ValueError(f"Epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"Batch size must be >= 1, got {self.batch_size}")
        for name in ('learning_rate', 'lhuc_learning_rate', 'lhuc_multiplier'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.batchnorm_policy not in BATCHNORM_POLICIES:
            raise ValueError(f"Unknown batchnorm policy '{self.batchnorm_policy}' "
                             f"(expected one of {BATCHNORM_POLICIES})")
        if not 0 < self.heldout_fraction < 1:
            raise ValueError(f"heldout_fraction must be in (0, 1), got {self.heldout_fraction}")

    def to_dict(self) -> Dict:
        return {
            'mode': self.mode.value,
            'epochs': self.epochs,
            'batch_size': self.batch_size,
            'learning_rate': self.learning_rate,
            'lhuc_learning_rate': self.lhuc_learning_rate,
            'lhuc_multiplier': self.lhuc_multiplier,
            'batchnorm_policy': self.batchnorm_policy,
            'adapt_utterances': self.adapt_utterances,
            'heldout_fraction': self.heldout_fraction,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'AdaptConfig':
        defaults = cls()
        return cls(**{key: data.get(key, value) for key, value in defaults.to_dict().items()})


@dataclass
class AdaptResult:
    model: Model
    metrics: List[Dict]
    mode: AdaptMode
    trainable_parameters: int
    learning_rates: Dict[str, float]
    speaker_id: Optional[str] = None
    extra: Dict = field(default_factory=dict)

    @property
    def final_accuracy(self) -> float:
        return self.metrics[-1]['frame_accuracy']


def select_trainable(m: Model, mode: AdaptMode, cfg: Optional[AdaptConfig] = None) -> List[ParamGroup]:
    """
    Parameter groups trained by an adaptation mode

    Sinc 0.0015; LHUC0/LHUC1 0.8; SincLHUC1 sinc 0.0015 with LHUC at 0.0015 x 500;
    SincLHUC0 both 0.0015; AllMinusSinc / All every conv group (and attached LHUC)
    at 0.0015. Batchnorm scale/shift never receive gradients.
    """
    cfg = cfg or AdaptConfig(mode=mode)
    groups = m.group_names()
    for site in mode.lhuc_sites:
        if not m.has_lhuc(site):
            raise ValueError(f"Mode {mode.value} needs LHUC scalers attached at {site}")

    lr = cfg.learning_rate
    sinc = ParamGroup('sinc', groups['sinc'], lr, step_scale=m.spec.sample_rate,
                      constraint=m.constrain_sinc_params)

    def lhuc(name: str, rate: float) -> ParamGroup:
        return ParamGroup(name, groups[name], rate)

    if mode == AdaptMode.SINC:
        return [sinc]
    if mode == AdaptMode.LHUC0:
        return [lhuc('lhuc0', cfg.lhuc_learning_rate)]
    if mode == AdaptMode.LHUC1:
        return [lhuc('lhuc1', cfg.lhuc_learning_rate)]
    if mode == AdaptMode.SINC_LHUC0:
        return [sinc, lhuc('lhuc0', lr)]
    if mode == AdaptMode.SINC_LHUC1:
        return [sinc, lhuc('lhuc1', lr * cfg.lhuc_multiplier)]

    selected = [] if mode == AdaptMode.ALL_MINUS_SINC else [sinc]
    selected.append(ParamGroup('conv', groups['conv'], lr))
    selected += [lhuc(name, lr) for name in ('lhuc0', 'lhuc1') if name in groups]
    return selected


def trainable_count(m: Model, groups: Sequence[ParamGroup]) -> int:
    return int(sum(g.size(m.params) for g in groups if not g.frozen))


def _heldout_split(data: FrameSet, cfg: AdaptConfig) -> Tuple[FrameSet, FrameSet, str]:
    """
    Split by utterance so no utterance feeds both adaptation and evaluation

    Returns:
        (adaptation frames, scoring frames, split tag for the metrics); a single
        utterance is scored on itself and tagged 'adapt'
    """
    if len(data.utterances()) < 2:
        logger.warning(f"Only {len(data.utterances())} adaptation utterance(s): "
                       f"scoring on the adaptation data itself")
        return data, data, 'adapt'
    splitter = GroupShuffleSplit(n_splits=1, test_size=cfg.heldout_fraction, random_state=cfg.seed)
    train_idx, test_idx = next(splitter.split(data.frames, data.labels, groups=data.utterance_ids.astype(str)))
    return data.subset(np.sort(train_idx)), data.subset(np.sort(test_idx)), 'heldout'


def adapt_run(m: Model, data: FrameSet, cfg: AdaptConfig, heldout: Optional[FrameSet] = None,
              speaker_id: Optional[str] = None) -> AdaptResult:
    """
    Adapt a copy of a trained model with supervised cross-entropy

    Args:
        m: Trained model (left untouched)
        data: Labelled adaptation frames
        cfg: Adaptation settings
        heldout: Frames to score after every epoch (default: an utterance-level
                 split of data)
        speaker_id: Tag recorded in the result

    Returns:
        AdaptResult with the adapted clone and one heldout record per epoch
        (epoch 0 is the unadapted model)
    """
    if data is None or len(data) == 0:
        raise ValueError("Adaptation data is empty")
    model = m.clone()
    for site in cfg.mode.lhuc_sites:
        attach_lhuc(model, site)
    split = 'heldout'
    if heldout is None:
        data, heldout, split = _heldout_split(data, cfg)

    groups = select_trainable(model, cfg.mode, cfg)
    bn_mode = 'train' if cfg.batchnorm_policy == 'update_stats' else 'frozen'
    trainer = Trainer(model, batch_size=cfg.batch_size, seed=cfg.seed, groups=groups, bn_mode=bn_mode)

    loss, accuracy = evaluate_model(model, heldout.frames, heldout.labels, cfg.batch_size)
    metrics = [metrics_record(0, split, loss, accuracy)]
    for epoch in range(1, cfg.epochs + 1):
        trainer.train_epoch(data.frames, data.labels, epoch)
        metrics.append(trainer.evaluate(heldout.frames, heldout.labels, epoch, split))
        logger.info(f"Adapt {cfg.mode.value}{' ' + speaker_id if speaker_id else ''} epoch {epoch}: "
                    f"{split} acc={metrics[-1]['frame_accuracy']:.3f}")

    return AdaptResult(model, metrics, cfg.mode, trainable_count(model, groups),
                       {g.name: g.learning_rate for g in groups}, speaker_id)


def adapt_speakers(model: Model, splits: CorpusSplits, cfg: AdaptConfig,
                   speakers: Optional[Sequence[str]] = None, utts: Optional[int] = None,
                   workers: int = 1) -> List[AdaptResult]:
    """
    Independent per-speaker adaptation from one base model

    Each target speaker adapts a clone on its adaptation utterances (the first
    `utts` of them when given) and is scored on its test frames.
    """
    speakers = list(speakers) if speakers else splits.speakers('target')
    utts = utts if utts is not None else cfg.adapt_utterances

    def run(speaker_id: str) -> AdaptResult:
        data = splits.adapt.for_speaker(speaker_id)
        if utts is not None:
            data = data.first_utterances(utts)
        heldout = splits.test.for_speaker(speaker_id)
        if len(data) == 0:
            raise ValueError(f"No adaptation frames for speaker '{speaker_id}'")
        result = adapt_run(model, data, cfg, heldout if len(heldout) else None, speaker_id)
        result.extra['utterances'] = len(data.utterances())
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(run, speakers))
    return [run(s) for s in speakers]


def utterance_sweep(model: Model, splits: CorpusSplits, cfg: AdaptConfig,
                    utt_counts: Sequence[int] = (1, 2, 3, 20), workers: int = 1) -> List[Dict]:
    """Mean held-out accuracy over target speakers after adapting on the first K utterances"""
    rows = []
    for count in utt_counts:
        results = adapt_speakers(model, splits, cfg, utts=count, workers=workers)
        accuracies = {r.speaker_id: r.final_accuracy for r in results}
        rows.append({
            'utterances': int(count),
            'utterances_used': int(min(r.extra['utterances'] for r in results)),
            'mean_accuracy': float(np.mean(list(accuracies.values()))),
            'per_speaker': accuracies,
        })
        logger.info(f"Sweep {count} utterances: mean acc={rows[-1]['mean_accuracy']:.3f}")
    return rows


def write_adaptation_report(result: AdaptResult, path: str, checkpoints: Optional[Dict[str, str]] = None) -> str:
    """JSON report: mode, trainable-parameter count, learning rates, metrics, checkpoints"""
    report = {
        'mode': result.mode.value,
        'speaker_id': result.speaker_id,
        'trainable_parameters': result.trainable_parameters,
        'learning_rates': result.learning_rates,
        'metrics': result.metrics,
        'checkpoints': checkpoints or {},
    }
    report.update(result.extra)
    with open(path, 'w') as f:
        json.dump(report, f, indent=2, sort_keys=True)
    return path
