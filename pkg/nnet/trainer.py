"""
Trainer Module
Mini-batch cross-entropy training and evaluation of the acoustic model
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from optim.adam import AdamOptimizer, ParamGroup
from .layers import softmax_xent
from .model import Model, model_backward, model_forward

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 0.0015
DEFAULT_BATCH_SIZE = 256
DEFAULT_EPOCHS = 6


def metrics_record(epoch: int, split: str, loss: float, frame_accuracy: float) -> Dict:
    """One metrics line: {epoch, split, loss, frame_accuracy}"""
    return {'epoch': int(epoch), 'split': split, 'loss': float(loss),
            'frame_accuracy': float(frame_accuracy)}


def batch_indices(n_examples: int, batch_size: int, seed: Optional[int], epoch: int) -> List[np.ndarray]:
    """Shuffled mini-batch index lists; the order is a function of (seed, epoch)"""
    if batch_size < 1:
        raise ValueError(f"Batch size must be >= 1, got {batch_size}")
    if seed is None:
        order = np.arange(n_examples)
    else:
        order = np.random.default_rng([seed, epoch]).permutation(n_examples)
    return [order[i:i + batch_size] for i in range(0, n_examples, batch_size)]


def evaluate_model(model: Model, frames: np.ndarray, labels: np.ndarray,
                   batch_size: int = DEFAULT_BATCH_SIZE) -> Tuple[float, float]:
    """
    Mean loss and frame accuracy with batchnorm in eval mode

    Returns:
        (loss, frame_accuracy)
    """
    frames = np.asarray(frames, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(frames) == 0:
        raise ValueError("Cannot evaluate on an empty set")
    total_loss, correct = 0.0, 0
    for idx in batch_indices(len(frames), batch_size, None, 0):
        logits, _ = model_forward(model, frames[idx], mode='eval')
        loss, _ = softmax_xent(logits, labels[idx])
        total_loss += loss * len(idx)
        correct += int(np.count_nonzero(logits.argmax(axis=1) == labels[idx]))
    return total_loss / len(frames), correct / len(frames)


class Trainer:
    """
    Trains every parameter group of a model with Adam

    Sinc cut-offs step in units of the sample rate and are projected back onto
    the feasible set after every step.
    """

    def __init__(self, model: Model, learning_rate: float = DEFAULT_LEARNING_RATE,
                 batch_size: int = DEFAULT_BATCH_SIZE, seed: int = 0,
                 groups: Optional[Sequence[ParamGroup]] = None, bn_mode: str = 'train'):
        """
        Initialize trainer

        Args:
            model: Model to train in place
            learning_rate: Adam learning rate for every group
            batch_size: Frames per mini-batch
            seed: Shuffling seed
            groups: Custom parameter groups (default: all groups at learning_rate)
            bn_mode: Batchnorm mode used for the training forward pass
        """
        self.model = model
        self.batch_size = batch_size
        self.seed = seed
        self.bn_mode = bn_mode
        self.optimizer = AdamOptimizer(groups if groups is not None
                                       else self.default_groups(model, learning_rate))
        self.history: List[Dict] = []

    @staticmethod
    def default_groups(model: Model, learning_rate: float) -> List[ParamGroup]:
        groups = []
        for name, param_names in model.group_names().items():
            if name == 'sinc':
                groups.append(ParamGroup(name, list(param_names), learning_rate,
                                         step_scale=model.spec.sample_rate,
                                         constraint=model.constrain_sinc_params))
            else:
                groups.append(ParamGroup(name, list(param_names), learning_rate))
        return groups

    def train_batch(self, frames: np.ndarray, labels: np.ndarray) -> float:
        logits, cache = model_forward(self.model, frames, mode=self.bn_mode)
        loss, grad_logits = softmax_xent(logits, labels)
        if not np.isfinite(loss):
            raise FloatingPointError(f"Non-finite training loss {loss}")
        grads = model_backward(self.model, cache, grad_logits, self.optimizer.trainable_names)
        self.model.params.update(self.optimizer.step(dict(self.model.params), grads))
        return loss

    def train_epoch(self, frames: np.ndarray, labels: np.ndarray, epoch: int) -> Dict:
        """
        One shuffled pass over the training frames

        Returns:
            Metrics record for the 'train' split (running loss and accuracy)
        """
        frames = np.asarray(frames, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if len(frames) == 0:
            raise ValueError("Cannot train on an empty set")
        total_loss = 0.0
        for step, idx in enumerate(batch_indices(len(frames), self.batch_size, self.seed, epoch)):
            try:
                loss = self.train_batch(frames[idx], labels[idx])
            except FloatingPointError as e:
                raise FloatingPointError(f"Training diverged in epoch {epoch}: {e}")
            total_loss += loss * len(idx)
            logger.debug(f"Epoch {epoch} batch {step}: loss={loss:.4f}")
        _, accuracy = evaluate_model(self.model, frames, labels, self.batch_size)
        record = metrics_record(epoch, 'train', total_loss / len(frames), accuracy)
        self.history.append(record)
        return record

    def evaluate(self, frames: np.ndarray, labels: np.ndarray, epoch: int, split: str = 'dev') -> Dict:
        loss, accuracy = evaluate_model(self.model, frames, labels, self.batch_size)
        record = metrics_record(epoch, split, loss, accuracy)
        self.history.append(record)
        return record

    def fit(self, train: Tuple[np.ndarray, np.ndarray], dev: Optional[Tuple[np.ndarray, np.ndarray]] = None,
            epochs: int = DEFAULT_EPOCHS) -> List[Dict]:
        """
        Train for a number of epochs, evaluating on dev after each one

        Args:
            train: (frames, labels)
            dev: Optional held-out (frames, labels)
            epochs: Number of passes

        Returns:
            Metrics records of this call
        """
        start = len(self.history)
        for epoch in range(1, epochs + 1):
            record = self.train_epoch(train[0], train[1], epoch)
            message = f"Epoch {epoch}/{epochs}: train loss={record['loss']:.4f} acc={record['frame_accuracy']:.3f}"
            if dev is not None and len(dev[0]):
                dev_record = self.evaluate(dev[0], dev[1], epoch, 'dev')
                message += f", dev loss={dev_record['loss']:.4f} acc={dev_record['frame_accuracy']:.3f}"
            logger.info(message)
        return self.history[start:]
