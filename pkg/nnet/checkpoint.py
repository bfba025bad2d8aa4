"""
Checkpoint Module
Directory checkpoints: JSON manifest plus a little-endian float64 parameter blob
"""

import json
import logging
import os
from collections import OrderedDict
from typing import Dict, List, Optional, Tuple

import numpy as np

from filterbank.filterbank_init import InitScheme
from optim.adam import AdamState
from . import config
from .model import Model, ModelSpec

logger = logging.getLogger(__name__)

BLOB_DTYPE = '<f8'


def _entries(model: Model, optimizer_state: Optional[AdamState]) -> List[Tuple[str, str, np.ndarray]]:
    """(store, name, array) in blob order: params, stats, gains, then Adam moments"""
    entries = [('params', name, value) for name, value in model.params.items()]
    entries += [('stats', name, value) for name, value in model.stats.items()]
    entries.append(('gains', 'sinc.gains', model.gains))
    if optimizer_state is not None:
        entries += [('adam.m', name, value) for name, value in optimizer_state.m.items()]
        entries += [('adam.v', name, value) for name, value in optimizer_state.v.items()]
    return entries


def save_checkpoint(model: Model, path: str, metadata: Optional[Dict] = None,
                    optimizer_state: Optional[AdamState] = None) -> str:
    """
    Write a checkpoint directory

    Args:
        model: Model to save
        path: Checkpoint directory (created if missing)
        metadata: Training metadata stored in the manifest
        optimizer_state: Adam moments to persist (optional)

    Returns:
        Checkpoint directory path
    """
    os.makedirs(path, exist_ok=True)
    entries = _entries(model, optimizer_state)
    manifest = {
        'format_version': config.CHECKPOINT_FORMAT_VERSION,
        'spec': model.spec.to_dict(),
        'init': model.init.to_dict() if model.init else None,
        'seed': model.seed,
        'normalize_input': model.normalize_input,
        'groups': {g: names for g, names in model.group_names().items()},
        'entries': [{'store': store, 'name': name, 'shape': list(value.shape)}
                    for store, name, value in entries],
        'has_optimizer_state': optimizer_state is not None,
        'optimizer_step': optimizer_state.step if optimizer_state is not None else None,
        'metadata': metadata or {},
    }
    blob = np.concatenate([np.asarray(value, dtype=np.float64).ravel() for _, _, value in entries])

    with open(os.path.join(path, config.CHECKPOINT_MANIFEST), 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    with open(os.path.join(path, config.CHECKPOINT_BLOB), 'wb') as f:
        f.write(blob.astype(BLOB_DTYPE).tobytes())

    logger.info(f"Checkpoint written to {path} ({blob.size} values)")
    return path


def inspect_checkpoint(path: str) -> Dict:
    """Read and validate a checkpoint manifest"""
    manifest_path = os.path.join(path, config.CHECKPOINT_MANIFEST)
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"Checkpoint manifest not found: {manifest_path}")
    with open(manifest_path, 'r') as f:
        manifest = json.load(f)
    version = manifest.get('format_version')
    if version != config.CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"Incompatible checkpoint format version {version} "
                         f"(expected {config.CHECKPOINT_FORMAT_VERSION})")
    for key in ('spec', 'entries'):
        if key not in manifest:
            raise ValueError(f"Checkpoint manifest missing '{key}'")
    return manifest


def load_checkpoint(path: str) -> Tuple[Model, Dict, Optional[AdamState]]:
    """
    Load a checkpoint directory

    Returns:
        (model, manifest, Adam state or None)
    """
    manifest = inspect_checkpoint(path)
    blob_path = os.path.join(path, config.CHECKPOINT_BLOB)
    if not os.path.exists(blob_path):
        raise FileNotFoundError(f"Checkpoint blob not found: {blob_path}")
    blob = np.fromfile(blob_path, dtype=BLOB_DTYPE).astype(np.float64)

    expected = sum(int(np.prod(e['shape'], dtype=np.int64)) for e in manifest['entries'])
    if blob.size != expected:
        raise ValueError(f"Checkpoint blob holds {blob.size} values, manifest expects {expected}")

    stores: Dict[str, Dict[str, np.ndarray]] = {
        'params': OrderedDict(), 'stats': OrderedDict(), 'gains': {}, 'adam.m': {}, 'adam.v': {}}
    offset = 0
    for entry in manifest['entries']:
        shape = tuple(entry['shape'])
        size = int(np.prod(shape, dtype=np.int64))
        if entry['store'] not in stores:
            raise ValueError(f"Unknown checkpoint store '{entry['store']}'")
        stores[entry['store']][entry['name']] = blob[offset:offset + size].reshape(shape).copy()
        offset += size

    if 'sinc.gains' not in stores['gains']:
        raise ValueError("Checkpoint has no sinc gains")
    init = InitScheme.from_dict(manifest['init']) if manifest.get('init') else None
    model = Model(ModelSpec.from_dict(manifest['spec']), stores['params'], stores['stats'],
                  stores['gains']['sinc.gains'], manifest.get('seed'), init,
                  manifest.get('normalize_input', True))

    state = None
    if manifest.get('has_optimizer_state'):
        state = AdamState(stores['adam.m'], stores['adam.v'], int(manifest.get('optimizer_step') or 0))
    logger.info(f"Loaded checkpoint {path}: {model}")
    return model, manifest, state


def checkpoints_identical(path_a: str, path_b: str) -> bool:
    """Byte-level comparison of two checkpoint directories"""
    for name in (config.CHECKPOINT_MANIFEST, config.CHECKPOINT_BLOB):
        with open(os.path.join(path_a, name), 'rb') as fa, open(os.path.join(path_b, name), 'rb') as fb:
            if fa.read() != fb.read():
                return False
    return True
