"""
Mismatch Experiment Module
Train on base-domain speakers, score on warped target speakers, adapt the sinc layer
"""

import json
import logging
import os
from dataclasses import replace
from typing import Dict, Optional, Tuple

import numpy as np

from analysis.exports import export_filters, export_scaling
from analysis.scaling import fit_alpha, scaling_pairs
from corpus.generator import CorpusSpec, default_mismatch_spec, gen_corpus
from corpus.warping import warp_knee
from filterbank import config as fb_config
from nnet.checkpoint import save_checkpoint
from nnet.model import build_model
from nnet.trainer import Trainer, evaluate_model
from .adaptation import AdaptMode, adapt_run

logger = logging.getLogger(__name__)

REPORT_FILE = 'mismatch_report.json'


def fit_band(spec: CorpusSpec, alpha: float) -> Tuple[float, float]:
    """
    Reference-frequency band for the warp-slope fit

    From f_min up to the highest prototype component, capped at the warp knee.
    Filters centred above the last component carry no data gradient and are left out.
    """
    top = max(max(p.frequencies) for p in spec.prototypes)
    return fb_config.F_MIN_HZ, min(warp_knee(alpha, spec.sample_rate / 2.0), top)


def run_mismatch_experiment(run_config, out_dir: Optional[str] = None) -> Dict:
    """
    Synthetic domain-mismatch experiment

    1. train a base model on base-domain speakers
    2. score it on the held-out base utterances and on the target speakers
    3. adapt only the sinc cut-offs on the target adaptation utterances
    4. report the recovered share of the accuracy gap and the fitted warp slope

    Args:
        run_config: RunConfig (corpus defaults to default_mismatch_spec(seed))
        out_dir: Directory for checkpoints, exports and the report (optional)

    Returns:
        Report dictionary
    """
    spec = run_config.corpus or default_mismatch_spec(run_config.seed)
    if run_config.model.input_samples != spec.frame_samples:
        raise ValueError(f"Model expects {run_config.model.input_samples}-sample frames, "
                         f"corpus produces {spec.frame_samples}")
    splits = gen_corpus(spec)
    if not len(splits.train) or not len(splits.adapt) or not len(splits.test):
        raise ValueError("Mismatch experiment needs base train frames and target adapt/test frames")

    model = build_model(run_config.model, run_config.init, run_config.seed, run_config.normalize_frames)
    trainer = Trainer(model, run_config.learning_rate, run_config.batch_size, run_config.seed)
    dev = (splits.dev.frames, splits.dev.labels) if len(splits.dev) else None
    train_metrics = trainer.fit((splits.train.frames, splits.train.labels), dev, run_config.epochs)

    reference = splits.dev if len(splits.dev) else splits.train
    _, base_accuracy = evaluate_model(model, reference.frames, reference.labels, run_config.batch_size)
    _, target_before = evaluate_model(model, splits.test.frames, splits.test.labels, run_config.batch_size)

    adapt_cfg = replace(run_config.adaptation, mode=AdaptMode.SINC)
    result = adapt_run(model, splits.adapt, adapt_cfg, heldout=splits.test)
    target_after = result.final_accuracy

    gap = base_accuracy - target_before
    recovered = (target_after - target_before) / gap if gap > 0 else float('nan')

    alpha = float(np.mean([s.alpha for s in spec.speakers if s.domain == 'target']))
    band = fit_band(spec, alpha)
    scaling = scaling_pairs(result.model.filterbank, model.filterbank, speaker='target')
    try:
        fitted = fit_alpha(scaling, *band)
    except ValueError as e:
        logger.warning(f"Could not fit warp slope: {e}")
        fitted = float('nan')

    report = {
        'base_accuracy': base_accuracy,
        'target_accuracy_before': target_before,
        'target_accuracy_after': target_after,
        'accuracy_gap': gap,
        'recovered_fraction': recovered,
        'applied_alpha': alpha,
        'fitted_alpha': fitted,
        'fit_band_hz': list(band),
        'trainable_parameters': result.trainable_parameters,
        'train_metrics': train_metrics,
        'adapt_metrics': result.metrics,
    }
    logger.info(f"Mismatch: base={base_accuracy:.3f} target before={target_before:.3f} "
                f"after={target_after:.3f} recovered={recovered:.2f} alpha={fitted:.3f}")

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        metadata = {'seed': run_config.seed, 'epochs': run_config.epochs}
        save_checkpoint(model, os.path.join(out_dir, 'base'), metadata)
        save_checkpoint(result.model, os.path.join(out_dir, 'adapted'), dict(metadata, mode='Sinc'))
        export_filters(result.model.effective_filterbank(), os.path.join(out_dir, 'filters_adapted.csv'))
        export_scaling(scaling, os.path.join(out_dir, 'scaling.csv'),
                       {'seed': run_config.seed, 'mode': 'Sinc', 'alpha': alpha})
        with open(os.path.join(out_dir, REPORT_FILE), 'w') as f:
            json.dump(report, f, indent=2, sort_keys=True)

    report['base_model'] = model
    report['adapted_model'] = result.model
    return report
