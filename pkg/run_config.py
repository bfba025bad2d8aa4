"""
Run Configuration
JSON experiment configuration with training defaults filled in
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional

from adapt.adaptation import AdaptConfig
from corpus.generator import CorpusSpec
from filterbank.filterbank_init import InitScheme
from nnet.model import ModelSpec, full_spec, toy_spec
from nnet.trainer import DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_FILE = 'resolved_config.json'

MODEL_PRESETS = {
    'full': full_spec,
    'toy': toy_spec,
}


def resolve_model_spec(data: Optional[Dict]) -> ModelSpec:
    """Model spec from a full layer list or a {"preset": name, **kwargs} entry"""
    if not data:
        return full_spec()
    if 'preset' in data:
        kwargs = {k: v for k, v in data.items() if k != 'preset'}
        if data['preset'] not in MODEL_PRESETS:
            raise ValueError(f"Unknown model preset '{data['preset']}' (expected one of {list(MODEL_PRESETS)})")
        return MODEL_PRESETS[data['preset']](**kwargs)
    return ModelSpec.from_dict(data)


@dataclass
class RunConfig:
    model: ModelSpec = field(default_factory=full_spec)
    init: InitScheme = field(default_factory=InitScheme.mel)
    seed: int = 0
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    normalize_frames: bool = True
    deterministic: bool = True
    adaptation: AdaptConfig = field(default_factory=AdaptConfig)
    corpus: Optional[CorpusSpec] = None
    out_dir: str = 'runs/default'
    corpus_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict, base_dir: str = '.') -> 'RunConfig':
        """
        Build a config, resolving relative paths against base_dir

        Args:
            data: Parsed JSON configuration
            base_dir: Directory of the config file
        """
        seed = int(data.get('seed', 0))
        optimizer = data.get('optimizer', {})
        adaptation = dict(data.get('adaptation', {}))
        adaptation.setdefault('seed', seed)
        adaptation.setdefault('batch_size', optimizer.get('batch_size', DEFAULT_BATCH_SIZE))
        adaptation.setdefault('learning_rate', optimizer.get('learning_rate', DEFAULT_LEARNING_RATE))

        corpus = data.get('corpus')
        if isinstance(corpus, str):
            corpus = CorpusSpec.load(os.path.join(base_dir, corpus))
        elif isinstance(corpus, dict):
            corpus = CorpusSpec.from_dict(corpus)

        paths = data.get('paths', {})
        corpus_dir = paths.get('corpus_dir')
        return cls(
            model=resolve_model_spec(data.get('model')),
            init=InitScheme.from_dict(data.get('init', {'scheme': 'mel'})),
            seed=seed,
            learning_rate=float(optimizer.get('learning_rate', DEFAULT_LEARNING_RATE)),
            batch_size=int(optimizer.get('batch_size', DEFAULT_BATCH_SIZE)),
            epochs=int(data.get('epochs', DEFAULT_EPOCHS)),
            normalize_frames=bool(data.get('normalize_frames', True)),
            deterministic=bool(data.get('deterministic', True)),
            adaptation=AdaptConfig.from_dict(adaptation),
            corpus=corpus,
            out_dir=os.path.join(base_dir, paths.get('out_dir', 'runs/default')),
            corpus_dir=os.path.join(base_dir, corpus_dir) if corpus_dir else None,
        )

    @classmethod
    def load(cls, path: str) -> 'RunConfig':
        if not os.path.exists(path):
            raise FileNotFoundError(f"Run config not found: {path}")
        with open(path, 'r') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ValueError(f"Unreadable run config {path}: {e}")
        return cls.from_dict(data, os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> Dict:
        """Fully resolved configuration (paths absolute)"""
        return {
            'model': self.model.to_dict(),
            'init': self.init.to_dict(),
            'seed': self.seed,
            'optimizer': {'learning_rate': self.learning_rate, 'batch_size': self.batch_size},
            'epochs': self.epochs,
            'normalize_frames': self.normalize_frames,
            'deterministic': self.deterministic,
            'adaptation': self.adaptation.to_dict(),
            'corpus': self.corpus.to_dict() if self.corpus else None,
            'paths': {'out_dir': os.path.abspath(self.out_dir),
                      'corpus_dir': os.path.abspath(self.corpus_dir) if self.corpus_dir else None},
        }

    def save_resolved(self, directory: str) -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, RESOLVED_CONFIG_FILE)
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        return path
