import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from bandtint import constants, models
from bandtint.core.tensor import Graph, OptimState, Tensor, backward, optim_step
from bandtint.errors import NonFiniteError, PipelineError, TrainingError

logger = logging.getLogger(__name__)

HOLDOUT_FRACTION = 0.2
FOLDS = 5

type LossFn = Callable[[Tensor, Tensor], Tensor]


@dataclass(frozen=True)
class Sample:
    inputs: tuple[Tensor, ...]
    """
    Constant network inputs, in forward() argument order.
    """

    target: Tensor


def _norms(params: Sequence[Tensor]) -> dict[str, float]:
    return {
        param.name or f'param[{index}]': float(np.linalg.norm(param.data))
        for index, param in enumerate(params)
    }


def _draw_batch(rng: np.random.Generator, count: int, batch: int) -> np.ndarray:
    if batch >= count:
        return np.arange(count)
    return np.sort(rng.choice(count, size=batch, replace=False))


def fit(
    params: Sequence[Tensor],
    forward: Callable[..., Tensor],
    samples: Sequence[Sample],
    loss_fn: LossFn,
    cfg: models.TrainConfig,
    *,
    label: str,
) -> models.LossCurve:
    """
    Minibatch Adam on the mean per-sample loss; one fresh graph per step.
    """
    if not samples:
        raise PipelineError(f'{label}: nothing to train on')
    rng = np.random.default_rng(cfg.seed)
    state = OptimState.for_params(params, learning_rate=cfg.lr)
    curve = models.LossCurve(label=label)
    started = time.perf_counter()

    for step in range(cfg.steps):
        indices = _draw_batch(rng, len(samples), cfg.batch)
        try:
            with Graph() as graph:
                losses = [loss_fn(forward(*samples[i].inputs), samples[i].target) for i in indices]
                batch_loss = losses[0]
                for loss in losses[1:]:
                    batch_loss = batch_loss + loss
                batch_loss = batch_loss * (1.0 / len(losses))
            value = batch_loss.item()
            if not math.isfinite(value):
                raise NonFiniteError(f'loss is {value}')
            backward(batch_loss, graph)
        except NonFiniteError as e:
            raise TrainingError(step, _norms(params), str(e)) from e

        curve.losses.append(value)
        optim_step(params, state)
        logger.debug('step', extra={'label': label, 'step': step, 'loss': value})

    logger.info(
        'trained',
        extra={
            'label': label,
            'steps': cfg.steps,
            'final_loss': curve.losses[-1] if curve.losses else None,
            'seconds': round(time.perf_counter() - started, 3),
        },
    )
    return curve


def evaluate_loss(
    forward: Callable[..., Tensor],
    samples: Sequence[Sample],
    loss_fn: LossFn,
) -> float:
    """
    Mean loss without recording a graph.
    """
    values = [loss_fn(forward(*sample.inputs), sample.target).item() for sample in samples]
    return math.fsum(values) / len(values)


def validate(count: int, protocol: constants.ValidationProtocol, seed: int) -> list[models.Split]:
    """
    Index splits for a corpus of `count` images.

    holdout20: one seeded 80/20 split. kfold5: five disjoint folds covering the corpus,
    sizes differing by at most one. none: everything trains.
    """
    protocol = constants.ValidationProtocol(protocol)
    if protocol is constants.ValidationProtocol.NONE:
        if count < 1:
            raise PipelineError('corpus is empty')
        return [models.Split(train=tuple(range(count)))]

    if count < FOLDS:
        raise PipelineError(f'{protocol} needs at least {FOLDS} images, got {count}')
    order = np.random.default_rng(seed).permutation(count)
    if protocol is constants.ValidationProtocol.HOLDOUT20:
        held = int(count * HOLDOUT_FRACTION)
        return [
            models.Split(
                train=tuple(sorted(int(i) for i in order[held:])),
                val=tuple(sorted(int(i) for i in order[:held])),
            )
        ]

    folds = np.array_split(order, FOLDS)
    return [
        models.Split(
            train=tuple(sorted(int(i) for j, fold in enumerate(folds) if j != k for i in fold)),
            val=tuple(sorted(int(i) for i in folds[k])),
        )
        for k in range(FOLDS)
    ]
