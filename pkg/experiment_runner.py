"""
Experiment Runner
Command-line surface for corpus generation, training, adaptation, evaluation and exports
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from adapt.adaptation import AdaptMode, adapt_speakers, write_adaptation_report
from adapt.mismatch import run_mismatch_experiment
from analysis.exports import export_filters, export_response, export_scaling, export_spectra
from analysis.scaling import scaling_pairs
from analysis.spectra import avg_log_mel, mel_filterbank_matrix
from corpus.generator import CorpusSpec, CorpusSplits, gen_corpus, load_corpus, write_corpus
from nnet.checkpoint import inspect_checkpoint, load_checkpoint, save_checkpoint
from nnet.model import build_model, count_parameters, layer_param_counts
from nnet.trainer import Trainer, evaluate_model
from run_config import RunConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_LEVEL = os.getenv('SINCADAPT_LOG_LEVEL', 'INFO')

CHECKPOINT_DIR = 'checkpoint'
METRICS_FILE = 'metrics.jsonl'


def setup_logging(verbose: bool = False):
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT)


def write_metrics(records: List[Dict], path: str) -> str:
    """One JSON object per line: {epoch, split, loss, frame_accuracy}"""
    with open(path, 'w') as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + '\n')
    return path


class ExperimentRunner:
    """Ties corpus, model, training and adaptation together for one RunConfig"""

    def __init__(self, run_config: RunConfig):
        """
        Initialize runner

        Args:
            run_config: Resolved experiment configuration
        """
        self.config = run_config
        self.out_dir = run_config.out_dir
        self._splits: Optional[CorpusSplits] = None

    @property
    def checkpoint_path(self) -> str:
        return os.path.join(self.out_dir, CHECKPOINT_DIR)

    def splits(self) -> CorpusSplits:
        if self._splits is None:
            if self.config.corpus_dir:
                self._splits = load_corpus(self.config.corpus_dir)
            elif self.config.corpus:
                self._splits = gen_corpus(self.config.corpus)
            else:
                raise ValueError("Run config names neither a corpus spec nor a corpus directory")
        return self._splits

    def train(self, save_optimizer: bool = False) -> Dict:
        """Train from scratch on the base-domain train split; writes checkpoint and metrics"""
        splits = self.splits()
        if not len(splits.train):
            raise ValueError("Corpus has no training frames")
        model = build_model(self.config.model, self.config.init, self.config.seed,
                            self.config.normalize_frames)
        trainer = Trainer(model, self.config.learning_rate, self.config.batch_size, self.config.seed)
        dev = (splits.dev.frames, splits.dev.labels) if len(splits.dev) else None
        records = trainer.fit((splits.train.frames, splits.train.labels), dev, self.config.epochs)

        self.config.save_resolved(self.out_dir)
        metadata = {'seed': self.config.seed, 'epochs': self.config.epochs,
                    'train_frames': len(splits.train)}
        save_checkpoint(model, self.checkpoint_path, metadata,
                        trainer.optimizer.state if save_optimizer else None)
        write_metrics(records, os.path.join(self.out_dir, METRICS_FILE))
        return {'checkpoint': self.checkpoint_path, 'metrics': records}

    def adapt(self, mode: AdaptMode, speaker: Optional[str] = None, utts: Optional[int] = None,
              epochs: Optional[int] = None, checkpoint: Optional[str] = None, workers: int = 1) -> List[Dict]:
        """
        Per-speaker adaptation of the trained checkpoint

        Every target speaker (or just `speaker`) adapts its own clone; each gets a
        checkpoint, a metrics file and a report under <out_dir>/adapt_<mode>/<speaker>.
        """
        checkpoint = checkpoint or self.checkpoint_path
        model, manifest, _ = load_checkpoint(checkpoint)
        cfg = replace(self.config.adaptation, mode=mode)
        if epochs is not None:
            cfg = replace(cfg, epochs=epochs)
        if self.config.deterministic:
            workers = 1

        splits = self.splits()
        speakers = [speaker] if speaker else None
        results = adapt_speakers(model, splits, cfg, speakers=speakers, utts=utts, workers=workers)

        mode_dir = os.path.join(self.out_dir, f'adapt_{mode.value}')
        self.config.save_resolved(mode_dir)
        summary = []
        for result in results:
            speaker_dir = os.path.join(mode_dir, result.speaker_id)
            adapted_path = save_checkpoint(result.model, os.path.join(speaker_dir, CHECKPOINT_DIR),
                                           manifest.get('metadata'))
            write_metrics(result.metrics, os.path.join(speaker_dir, METRICS_FILE))
            write_adaptation_report(result, os.path.join(speaker_dir, 'report.json'),
                                    {'before': os.path.abspath(checkpoint),
                                     'after': os.path.abspath(adapted_path)})
            summary.append({'speaker_id': result.speaker_id, 'checkpoint': adapted_path,
                            'frame_accuracy': result.final_accuracy,
                            'trainable_parameters': result.trainable_parameters})
        return summary


def _print_json(data):
    print(json.dumps(data, indent=2, sort_keys=True))


def cmd_gen_data(args) -> int:
    spec = CorpusSpec.load(args.spec)
    index_path = write_corpus(spec, args.out)
    print(index_path)
    return 0


def cmd_train(args) -> int:
    runner = ExperimentRunner(RunConfig.load(args.config))
    result = runner.train(save_optimizer=args.save_optimizer)
    _print_json({'checkpoint': result['checkpoint'], 'final': result['metrics'][-1] if result['metrics'] else None})
    return 0


def cmd_adapt(args) -> int:
    runner = ExperimentRunner(RunConfig.load(args.config))
    speaker = None if args.all_speakers else args.speaker
    summary = runner.adapt(AdaptMode.parse(args.mode), speaker, args.utts, args.epochs,
                           args.checkpoint, args.workers)
    _print_json(summary)
    return 0


def cmd_eval(args) -> int:
    model, _, _ = load_checkpoint(args.checkpoint)
    splits = load_corpus(args.corpus)
    names = [args.split] if args.split else ['train', 'dev', 'adapt', 'test']
    results = {}
    for name in names:
        frames = splits.split(name)
        if len(frames):
            loss, accuracy = evaluate_model(model, frames.frames, frames.labels)
            results[name] = {'loss': loss, 'frame_accuracy': accuracy, 'frames': len(frames)}
    if args.out:
        with open(args.out, 'w') as f:
            json.dump(results, f, indent=2, sort_keys=True)
    _print_json(results)
    return 0


def _sidecar(args, checkpoint: str, manifest: Dict, mode: Optional[str] = None) -> Dict:
    return {'checkpoint': os.path.abspath(checkpoint), 'seed': manifest.get('seed'),
            'mode': mode or getattr(args, 'mode', None)}


def cmd_export_filters(args) -> int:
    model, manifest, _ = load_checkpoint(args.checkpoint)
    export_filters(model.effective_filterbank(), args.out, _sidecar(args, args.checkpoint, manifest))
    print(args.out)
    return 0


def cmd_export_scaling(args) -> int:
    adapted, manifest, _ = load_checkpoint(args.adapted)
    reference, _, _ = load_checkpoint(args.reference)
    scaling = scaling_pairs(adapted.filterbank, reference.filterbank, args.speaker)
    sidecar = _sidecar(args, args.adapted, manifest)
    sidecar['reference'] = os.path.abspath(args.reference)
    export_scaling(scaling, args.out, sidecar)
    print(args.out)
    return 0


def cmd_export_response(args) -> int:
    model, manifest, _ = load_checkpoint(args.checkpoint)
    sidecar = _sidecar(args, args.checkpoint, manifest)
    sidecar['n_fft'] = args.n_fft
    export_response(model.effective_filterbank(), args.n_fft, args.out, sidecar)
    print(args.out)
    return 0


def cmd_export_spectra(args) -> int:
    splits = load_corpus(args.corpus)
    frames = splits.split(args.split)
    if args.speaker:
        frames = frames.for_speaker(args.speaker)
    mean, std = avg_log_mel(frames.frames, args.n_mels, splits.spec.sample_rate)
    _, centres = mel_filterbank_matrix(args.n_mels, frames.frames.shape[1], splits.spec.sample_rate)
    export_spectra(mean, std, centres, args.out,
                   {'corpus': os.path.abspath(args.corpus), 'split': args.split,
                    'speaker': args.speaker, 'seed': splits.spec.seed, 'n_mels': args.n_mels})
    print(args.out)
    return 0


def cmd_param_count(args) -> int:
    run_config = RunConfig.load(args.config)
    if args.per_layer:
        for name, count in layer_param_counts(run_config.model):
            print(f"{name}\t{count}")
    print(count_parameters(run_config.model))
    return 0


def cmd_inspect(args) -> int:
    manifest = inspect_checkpoint(args.checkpoint)
    _print_json({
        'format_version': manifest['format_version'],
        'seed': manifest.get('seed'),
        'init': manifest.get('init'),
        'layers': len(manifest['spec']['layers']),
        'n_classes': manifest['spec']['n_classes'],
        'groups': manifest.get('groups'),
        'values': int(sum(np.prod(e['shape'], dtype=np.int64) for e in manifest['entries'])),
        'has_optimizer_state': manifest.get('has_optimizer_state', False),
        'metadata': manifest.get('metadata', {}),
    })
    return 0


def cmd_mismatch(args) -> int:
    run_config = RunConfig.load(args.config)
    out_dir = args.out or run_config.out_dir
    run_config.save_resolved(out_dir)
    report = run_mismatch_experiment(run_config, out_dir)
    _print_json({k: v for k, v in report.items() if not k.endswith('_model') and not k.endswith('_metrics')})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='experiment_runner',
                                     description="Sinc filterbank adaptation experiments")
    parser.add_argument('--verbose', action='store_true', help="Debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen-data', help="Write a synthetic corpus")
    p.add_argument('spec', help="CorpusSpec JSON")
    p.add_argument('--out', default='corpus', help="Output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser('train', help="Train a model from a run config")
    p.add_argument('config')
    p.add_argument('--save-optimizer', action='store_true', help="Store Adam moments in the checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('adapt', help="Per-speaker adaptation of a trained checkpoint")
    p.add_argument('config')
    p.add_argument('--mode', required=True, help="Sinc, LHUC0, SincLHUC0, LHUC1, SincLHUC1, AllMinusSinc, All")
    who = p.add_mutually_exclusive_group()
    who.add_argument('--speaker', help="Adapt a single speaker")
    who.add_argument('--all-speakers', action='store_true', help="Adapt every target speaker (default)")
    p.add_argument('--utts', type=int, help="Adapt on the first K utterances")
    p.add_argument('--epochs', type=int, help="Override adaptation epochs")
    p.add_argument('--checkpoint', help="Base checkpoint (default: <out_dir>/checkpoint)")
    p.add_argument('--workers', type=int, default=1, help="Parallel speakers (ignored when deterministic)")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser('eval', help="Frame accuracy of a checkpoint on a corpus")
    p.add_argument('checkpoint')
    p.add_argument('corpus')
    p.add_argument('--split', choices=['train', 'dev', 'adapt', 'test'])
    p.add_argument('--out', help="Write results JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('export-filters', help="CSV of filter edges and gains")
    p.add_argument('checkpoint')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export_filters)

    p = sub.add_parser('export-scaling', help="CSV of adapted vs reference centre frequencies")
    p.add_argument('adapted')
    p.add_argument('reference')
    p.add_argument('--speaker')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export_scaling)

    p = sub.add_parser('export-response', help="CSV of filter magnitude responses")
    p.add_argument('checkpoint')
    p.add_argument('--n-fft', type=int, default=1024)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export_response)

    p = sub.add_parser('export-spectra', help="CSV of average log-mel spectra")
    p.add_argument('corpus')
    p.add_argument('--split', default='test', choices=['train', 'dev', 'adapt', 'test'])
    p.add_argument('--speaker')
    p.add_argument('--n-mels', type=int, default=40)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_export_spectra)

    p = sub.add_parser('param-count', help="Parameter count of a run config's model")
    p.add_argument('config')
    p.add_argument('--per-layer', action='store_true')
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser('inspect', help="Summarize a checkpoint manifest")
    p.add_argument('checkpoint')
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser('mismatch', help="Synthetic mismatch experiment")
    p.add_argument('config')
    p.add_argument('--out', help="Output directory (default: config out_dir)")
    p.set_defaults(func=cmd_mismatch)
    return parser


def command_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one subcommand

    Returns:
        0 on success, 1 on a runtime error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.verbose)
    try:
        return args.func(args)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


def main():
    sys.exit(command_dispatch())


if __name__ == '__main__':
    main()
