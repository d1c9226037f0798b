"""
Training Service Layer

Handles end-to-end training of HarsanyiNets:
- Parameter initialization (fixed fan-in selectors, Gaussian selectors)
- Reverse-mode gradients through the soft-AND graph (GradientTape)
- Straight-through surrogate gradients for the selectors tau
- Adam / SGD updates and the epoch loop with a metrics log

The forward pass is always soft-AND during training. The exponent 1/|children|
of the geometric mean is held constant within a step, and the gradient through
a factor that is exactly 0 is 0.
"""

import copy
import logging
import time
from dataclasses import dataclass, replace
from typing import List

import numpy as np

from harsanyi.config import get_config
from harsanyi.errors import CapacityError, ContractError, NumericError
from harsanyi.models.experiment import InitScheme, MetricsRow, TrainConfig
from harsanyi.models.harsanyi_cnn import (
    CnnConfig, ConvHarsanyiBlock, HarsanyiCNN, StemLayer, scatter_windows
)
from harsanyi.models.harsanyi_mlp import (
    AndMode, ChildrenScope, HarsanyiBlock, HarsanyiMLP, OutputHead
)
from harsanyi.utils.rng import DATA, INIT, SHUFFLE, substream

logger = logging.getLogger(__name__)


def ste_surrogate_grad(tau, beta):
    """
    d sigma / d tau under the straight-through estimator:
    beta * e^-tau / (1 + e^-tau)^2. Even in tau, at most beta / 4.
    """
    e = np.exp(-np.abs(np.asarray(tau, dtype=np.float64)))
    out = beta * e / (1.0 + e) ** 2
    return float(out) if out.ndim == 0 else out


def _safe_reciprocal(values):
    out = np.zeros_like(values)
    np.divide(1.0, values, out=out, where=values > 0.0)
    return out


class GradientTape:
    """
    Layer-level reverse-mode tape for one minibatch.

    Each recorded entry names the node it produced and a closure that, given
    that node's gradient, pushes gradients to its inputs and parameters.
    Replay runs the entries in reverse recording order.
    """

    def __init__(self):
        self._entries = []
        self._node_grads = {}
        self.grads = {}

    def record(self, node, backward):
        self._entries.append((node, backward))

    def add_node_grad(self, node, value):
        if node in self._node_grads:
            self._node_grads[node] = self._node_grads[node] + value
        else:
            self._node_grads[node] = value

    def add_param_grad(self, name, value):
        if name in self.grads:
            self.grads[name] = self.grads[name] + value
        else:
            self.grads[name] = value

    def backward(self, node, seed):
        self._node_grads = {node: seed}
        for produced, backward in reversed(self._entries):
            upstream = self._node_grads.pop(produced, None)
            if upstream is not None:
                backward(upstream)
        return self.grads

    def gradient(self, name, like):
        """Accumulated gradient of one parameter (zeros if nothing reached it)."""
        return self.grads.get(name, np.zeros_like(like))


@dataclass
class TrainingResult:
    model: object
    metrics: List[MetricsRow]
    config: TrainConfig


class Adam:
    """Adaptive moment estimation with bias correction, no weight decay."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        for name in sorted(params):
            grad = grads[name]
            m = self.m.get(name, np.zeros_like(grad))
            v = self.v.get(name, np.zeros_like(grad))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, learning_rate=1e-3):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for name in sorted(params):
            params[name] -= self.learning_rate * grads[name]


def softmax_cross_entropy(logits, labels):
    """
    Mean cross-entropy and d loss / d logits.

    Raises:
        NumericError: a non-finite per-sample loss, naming the sample
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    per_sample = np.log(total[:, 0]) - shifted[np.arange(labels.shape[0]), labels]
    bad = np.flatnonzero(~np.isfinite(per_sample))
    if bad.size:
        raise NumericError(f"Non-finite loss for sample {int(bad[0])}", where=int(bad[0]))
    probs = exp / total
    probs[np.arange(labels.shape[0]), labels] -= 1.0
    return float(per_sample.mean()), per_sample, probs / labels.shape[0]


class TrainingService:
    """Service class for initialization, gradients and the training loop"""

    # ---- initialization --------------------------------------------------

    @staticmethod
    def init_params(config, seed, scheme=None):
        """
        Build a model with freshly drawn parameters.

        Args:
            config: ModelConfig (MLP) or CnnConfig (CNN)
            seed: master seed; draws come from the INIT substream
            scheme: InitScheme, defaulting to the topology's own scheme

        Raises:
            CapacityError: fan-in larger than a candidate pool
            ContractError: scheme does not fit the topology
        """
        rng = substream(seed, INIT)
        if isinstance(config, CnnConfig):
            scheme = scheme or InitScheme(kind='cnn_gaussian')
            if scheme.kind != 'cnn_gaussian':
                raise ContractError(f"Init scheme {scheme.kind} does not fit a conv model")
            return TrainingService._init_cnn(config, scheme, rng)
        scheme = scheme or InitScheme()
        if scheme.kind != 'mlp_fixed_fanin':
            raise ContractError(f"Init scheme {scheme.kind} does not fit an MLP model")
        return TrainingService._init_mlp(config, scheme, rng)

    @staticmethod
    def _init_mlp(config, scheme, rng):
        blocks = []
        for l, units in enumerate(config.block_sizes):
            pool = config.pool_size(l)
            if scheme.fanin > pool:
                raise CapacityError(f"fanin {scheme.fanin} exceeds the candidate pool of block {l} ({pool})")
            tau = -np.ones((units, pool))
            for u in range(units):
                tau[u, rng.choice(pool, size=scheme.fanin, replace=False)] = 1.0
            bound = np.sqrt(6.0 / scheme.fanin)
            blocks.append(HarsanyiBlock(rng.uniform(-bound, bound, size=(units, pool)), tau))
        head_bound = 1.0 / np.sqrt(config.total_units)
        head = OutputHead(rng.uniform(-head_bound, head_bound, size=(config.class_count, config.total_units)))
        return HarsanyiMLP(config, blocks, head)

    @staticmethod
    def _init_cnn(config, scheme, rng):
        fan_in = config.input_channels * config.stem_kernel ** 2
        bound = np.sqrt(6.0 / fan_in)
        stem = StemLayer(
            rng.uniform(-bound, bound, size=(config.stem_channels, config.input_channels,
                                             config.stem_kernel, config.stem_kernel)),
            np.zeros(config.stem_channels),
        )
        blocks = []
        for l in range(config.block_count):
            channels_in = config.block_input_channels(l)
            bound = np.sqrt(6.0 / (channels_in * config.kernel ** 2))
            weights = rng.uniform(-bound, bound, size=(config.channels, channels_in, config.kernel, config.kernel))
            tau = rng.normal(0.0, scheme.tau_sd, size=(config.grid_height, config.grid_width,
                                                      config.kernel, config.kernel))
            blocks.append(ConvHarsanyiBlock(weights, tau))
        head_bound = 1.0 / np.sqrt(config.total_units)
        head = OutputHead(rng.uniform(-head_bound, head_bound, size=(config.class_count, config.total_units)))
        return HarsanyiCNN(config, stem, blocks, head)

    # ---- forward / backward ----------------------------------------------

    @staticmethod
    def forward_on_tape(model, inputs, tape=None):
        """Soft-AND logits for a batch of unmasked inputs, recording backward closures."""
        if isinstance(model, HarsanyiCNN):
            return TrainingService._cnn_forward(model, inputs, tape)
        return TrainingService._mlp_forward(model, inputs, tape)

    @staticmethod
    def _mlp_forward(model, inputs, tape):
        cfg = model.config
        outputs = []
        for l, block in enumerate(model.blocks):
            children = model.children_of(l, inputs, outputs)
            z, cache = block.forward(children, cfg.gamma, AndMode.SOFT, block_index=l, keep=True)
            if tape is not None:
                tape.record(f'z{l}', lambda dz, l=l, block=block, cache=cache:
                            TrainingService._mlp_block_backward(tape, model, l, block, cache, dz))
            outputs.append(z)
        units = np.concatenate(outputs, axis=1)
        if tape is not None:
            tape.record('logits', lambda dlogits: TrainingService._head_backward(
                tape, model, units, [z.shape[1:] for z in outputs], dlogits))
        return model.head.logits(units)

    @staticmethod
    def _head_backward(tape, model, units, shapes, dlogits):
        tape.add_param_grad('head.weights', dlogits.T @ units)
        dunits = dlogits @ model.head.weights
        start = 0
        for l, shape in enumerate(shapes):
            width = int(np.prod(shape))
            tape.add_node_grad(f'z{l}', dunits[:, start:start + width].reshape((-1,) + tuple(shape)))
            start += width

    @staticmethod
    def _mlp_block_backward(tape, model, l, block, cache, dz):
        cfg = model.config
        children, gate, linear = cache['children'], cache['gate'], cache['linear']
        mask = block.mask
        dh = dz * (cache['pre'] > 0.0)
        dlinear = dh * gate
        dgate = dh * linear

        tape.add_param_grad(f'block{l}.weights', (dlinear.T @ children) * mask)
        dchildren = dlinear @ (block.weights * mask)

        factors = np.tanh(cfg.gamma * np.abs(children))
        inverse = _safe_reciprocal(factors)
        coef = dgate * gate / np.maximum(cache['counts'], 1)
        dfactors = (coef @ mask) * inverse
        dchildren = dchildren + dfactors * cfg.gamma * (1.0 - factors ** 2) * np.sign(children)

        # selectors: sigma_j enters the linear part as a multiplier and the
        # AND part as the factor 1 - sigma_j * (1 - f_j)
        dsigma = (dlinear.T @ children) * block.weights
        off = coef.T @ (1.0 - factors)
        on = coef.T @ ((1.0 - factors) * inverse)
        dsigma = dsigma - np.where(mask, on, off)
        tape.add_param_grad(f'block{l}.tau', dsigma * ste_surrogate_grad(block.tau, cfg.beta))

        if l == 0:
            return
        if cfg.children_scope == ChildrenScope.PREVIOUS_BLOCK_ONLY:
            tape.add_node_grad(f'z{l - 1}', dchildren)
            return
        start = 0
        for k in range(l):
            width = cfg.block_sizes[k]
            tape.add_node_grad(f'z{k}', dchildren[:, start:start + width])
            start += width

    @staticmethod
    def _cnn_forward(model, inputs, tape):
        cfg = model.config
        z0, stem_cache = model.stem.forward(inputs, cfg.pool, keep=True)
        if tape is not None:
            tape.record('z_stem', lambda dz: TrainingService._stem_backward(tape, model, stem_cache, dz))
        current, previous = z0, 'z_stem'
        outputs = []
        for l, block in enumerate(model.blocks):
            current, cache = block.forward(current, cfg.gamma, AndMode.SOFT, block_index=l, keep=True)
            if tape is not None:
                tape.record(f'z{l}', lambda dz, l=l, block=block, cache=cache, target=previous:
                            TrainingService._conv_block_backward(tape, model, l, block, cache, dz, target))
            outputs.append(current)
            previous = f'z{l}'
        units = np.concatenate([z.reshape(z.shape[0], -1) for z in outputs], axis=1)
        if tape is not None:
            tape.record('logits', lambda dlogits: TrainingService._head_backward(
                tape, model, units, [z.shape[1:] for z in outputs], dlogits))
        return model.head.logits(units)

    @staticmethod
    def _conv_block_backward(tape, model, l, block, cache, dz, target):
        cfg = model.config
        inputs, gate, linear = cache['inputs'], cache['gate'], cache['linear']
        selected = cache['selected'].astype(np.float64)
        kernel = block.kernel
        dh = dz * (cache['pre'] > 0.0)
        dlinear = dh * gate[:, None]
        dgate = np.sum(dh * linear, axis=1)

        input_windows = cache['windows']
        tape.add_param_grad(f'block{l}.weights', np.einsum('bohw,bchwij,hwij->ocij', dlinear, input_windows, selected))
        dwindows = np.einsum('bohw,ocij,hwij->bchwij', dlinear, block.weights, selected)
        dinputs = scatter_windows(dwindows, kernel)

        factors = np.tanh(cfg.gamma * cache['signal_windows'])
        inverse = _safe_reciprocal(factors)
        coef = dgate * gate / np.maximum(cache['counts'], 1)[None]
        dsignal_windows = coef[..., None, None] * selected[None] * inverse * cfg.gamma * (1.0 - factors ** 2)
        dsignal = scatter_windows(dsignal_windows, kernel)
        dinputs = dinputs + dsignal[:, None] * np.sign(inputs) / inputs.shape[1]

        dsigma = np.einsum('bohw,ocij,bchwij->hwij', dlinear, block.weights, input_windows)
        off = np.einsum('bhw,bhwij->hwij', coef, 1.0 - factors)
        on = np.einsum('bhw,bhwij->hwij', coef, (1.0 - factors) * inverse)
        dsigma = (dsigma - np.where(cache['selected'], on, off)) * block.inside
        tape.add_param_grad(f'block{l}.tau', dsigma * ste_surrogate_grad(block.tau, cfg.beta))
        tape.add_node_grad(target, dinputs)

    @staticmethod
    def _stem_backward(tape, model, cache, dz0):
        pooled, tiles, pool = cache['pooled'], cache['tiles'], cache['pool']
        dpooled = dz0 * (pooled > 0.0)
        winners = np.argmax(tiles, axis=-1)
        dtiles = (np.arange(pool * pool) == winners[..., None]) * dpooled[..., None]
        batch, channels, height, width, _ = dtiles.shape
        dconv = dtiles.reshape(batch, channels, height, width, pool, pool)
        dconv = dconv.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, height * pool, width * pool)
        tape.add_param_grad('stem.weights', np.einsum('bohw,bchwij->ocij', dconv, cache['windows']))
        tape.add_param_grad('stem.bias', dconv.sum(axis=(0, 2, 3)))

    @staticmethod
    def loss_and_gradients(model, batch, config=None):
        """
        Mean softmax cross-entropy of one minibatch and its gradients.

        Args:
            model: HarsanyiMLP or HarsanyiCNN
            batch: (inputs, labels)

        Returns:
            (loss, GradientTape) with tape.grads keyed like model.parameters()
        """
        inputs, labels = batch
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape[0] == 0:
            raise ContractError("Cannot train on an empty batch")
        if labels.min() < 0 or labels.max() >= model.class_count:
            raise ContractError(f"Labels must lie in 0..{model.class_count - 1}")
        tape = GradientTape()
        logits = TrainingService.forward_on_tape(model, inputs, tape)
        loss, _, dlogits = softmax_cross_entropy(logits, labels)
        tape.backward('logits', dlogits)
        return loss, tape

    @staticmethod
    def batch_loss(model, inputs, labels):
        logits = TrainingService.forward_on_tape(model, inputs, None)
        return softmax_cross_entropy(logits, np.asarray(labels, dtype=np.int64))[0]

    @staticmethod
    def finite_difference_gradients(model, batch, names, step=1e-6):
        """
        Central differences of the batch loss for every entry of the named
        parameters. The parameters are perturbed in place and restored.
        """
        inputs, labels = batch
        params = model.parameters()
        out = {}
        for name in names:
            param = params[name]
            grad = np.zeros_like(param)
            flat, flat_grad = param.reshape(-1), grad.reshape(-1)
            for k in range(flat.shape[0]):
                original = flat[k]
                flat[k] = original + step
                upper = TrainingService.batch_loss(model, inputs, labels)
                flat[k] = original - step
                lower = TrainingService.batch_loss(model, inputs, labels)
                flat[k] = original
                flat_grad[k] = (upper - lower) / (2.0 * step)
            out[name] = grad
        return out

    # ---- evaluation ------------------------------------------------------

    @staticmethod
    def predict_logits(model, inputs, mode=AndMode.SOFT):
        """Logits for unmasked inputs, chunked like masked inference."""
        chunk = get_config().FORWARD_BATCH
        parts = []
        for start in range(0, inputs.shape[0], chunk):
            batch = inputs[start:start + chunk]
            if isinstance(model, HarsanyiCNN):
                batch = model.stem.forward(batch, model.config.pool)
                units = model.units_from_inputs(batch, mode)
                flat = np.concatenate([z.reshape(z.shape[0], -1) for z in units], axis=1)
            else:
                flat = np.concatenate(model.units_from_inputs(batch, mode), axis=1)
            parts.append(model.head.logits(flat))
        return np.concatenate(parts, axis=0) if parts else np.zeros((0, model.class_count))

    @staticmethod
    def accuracy(model, dataset, mode=AndMode.SOFT):
        if len(dataset) == 0 or dataset.labels is None:
            return float('nan')
        predictions = np.argmax(TrainingService.predict_logits(model, dataset.inputs, mode), axis=1)
        return float(np.mean(predictions == dataset.labels))

    # ---- loop ------------------------------------------------------------

    @staticmethod
    def split_dataset(dataset, validation_fraction, seed):
        """Seeded train/validation split from the DATA substream."""
        order = substream(seed, DATA).permutation(len(dataset))
        held_out = int(round(validation_fraction * len(dataset)))
        validation = np.sort(order[:held_out])
        training = np.sort(order[held_out:])
        return dataset.subset(training), dataset.subset(validation)

    @staticmethod
    def make_optimizer(config):
        if config.optimizer == 'sgd':
            return SGD(config.learning_rate)
        return Adam(config.learning_rate)

    @staticmethod
    def train(model, dataset, config, callback=None):
        """
        Fit a model with minibatch gradient steps.

        Args:
            model: initialized HarsanyiMLP or HarsanyiCNN (left untouched; a copy is trained)
            dataset: Dataset or ImageDataset with labels
            config: TrainConfig
            callback: optional callable(epoch, model) run after every epoch

        Returns:
            TrainingResult: trained model and one MetricsRow per epoch

        Raises:
            NumericError: the epoch loss became non-finite
        """
        if dataset.labels is None:
            raise ContractError("Training needs labelled data")
        trained = copy.deepcopy(model)
        overrides = {k: float(getattr(config, k)) for k in ('beta', 'gamma') if getattr(config, k) is not None}
        if overrides:
            trained.config = replace(trained.config, **overrides)
        train_set, validation_set = TrainingService.split_dataset(dataset, config.validation_fraction, config.seed)
        optimizer = TrainingService.make_optimizer(config)
        params = trained.parameters()
        metrics = []

        logger.info(f"Training {trained.topology} model on {len(train_set)} samples "
                    f"({len(validation_set)} held out) for {config.epochs} epochs")
        started = time.perf_counter()
        for epoch in range(1, config.epochs + 1):
            order = substream(config.seed, SHUFFLE, epoch).permutation(len(train_set))
            total = 0.0
            for start in range(0, order.shape[0], config.batch_size):
                rows = order[start:start + config.batch_size]
                try:
                    loss, tape = TrainingService.loss_and_gradients(
                        trained, (train_set.inputs[rows], train_set.labels[rows]), config)
                except NumericError as e:
                    raise NumericError(f"Training diverged at epoch {epoch}: {e}", where=epoch)
                total += loss * rows.shape[0]
                grads = {name: tape.gradient(name, param) for name, param in params.items()}
                optimizer.step(params, grads)
            epoch_loss = total / max(len(train_set), 1)
            if not np.isfinite(epoch_loss):
                raise NumericError(f"Training diverged at epoch {epoch}", where=epoch)
            row = MetricsRow(epoch, epoch_loss,
                             TrainingService.accuracy(trained, train_set),
                             TrainingService.accuracy(trained, validation_set))
            metrics.append(row)
            logger.debug(f"epoch {epoch}: loss={row.loss:.6f} train_acc={row.train_acc:.4f} val_acc={row.val_acc:.4f}")
            if callback is not None:
                callback(epoch, trained)

        logger.info(f"Training finished in {time.perf_counter() - started:.2f}s")
        return TrainingResult(trained, metrics, config)
