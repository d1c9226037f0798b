# harsanyi_cnn.py
"""
Harsanyi-CNN at toy scale.

A stem (conv, max-pool, ReLU) turns the image into z^(0) of shape C0 x H x W.
The players are the H*W locations of z^(0): masking a location zeroes its
whole channel vector. Each block is a stride-1, same-padded convolution whose
AND gate works per location: all C output channels at (h, w) share one
selector over the K x K neighbourhood, so they share one receptive field.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from harsanyi.errors import ChannelCoherenceError, ContractError, NumericError
from harsanyi.models.harsanyi_mlp import AndMode, OutputHead, ReceptiveFieldMap, UnitActivations, geometric_mean
from harsanyi.models.player_set import PlayerSet


def windows(tensor, kernel):
    """Zero-padded K x K neighbourhoods over the last two axes: (..., H, W, K, K)."""
    r = kernel // 2
    pad = [(0, 0)] * (tensor.ndim - 2) + [(r, r), (r, r)]
    return sliding_window_view(np.pad(tensor, pad), (kernel, kernel), axis=(-2, -1))


def scatter_windows(grads, kernel):
    """Adjoint of `windows`: sum (..., H, W, K, K) neighbourhood grads back onto (..., H, W)."""
    r = kernel // 2
    height, width = grads.shape[-4], grads.shape[-3]
    out = np.zeros(grads.shape[:-4] + (height + 2 * r, width + 2 * r))
    for i in range(kernel):
        for j in range(kernel):
            out[..., i:i + height, j:j + width] += grads[..., i, j]
    return out[..., r:r + height, r:r + width]


def inside_mask(height, width, kernel):
    """(H, W, K, K): True where the candidate location lies inside the grid."""
    r = kernel // 2
    rows = np.arange(height)[:, None] + np.arange(kernel)[None, :] - r
    cols = np.arange(width)[:, None] + np.arange(kernel)[None, :] - r
    row_ok = (rows >= 0) & (rows < height)
    col_ok = (cols >= 0) & (cols < width)
    return row_ok[:, None, :, None] & col_ok[None, :, None, :]


@dataclass(frozen=True)
class CnnConfig:
    """Stem and block hyperparameters. Blocks use stride 1 and same padding."""

    image_height: int
    image_width: int
    class_count: int
    input_channels: int = 1
    stem_kernel: int = 3
    stem_channels: int = 8
    pool: int = 1
    block_count: int = 2
    channels: int = 8
    kernel: int = 3
    beta: float = 1000.0
    gamma: float = 1.0
    and_mode: AndMode = AndMode.SOFT

    stride = 1
    padding = 'same'

    def __post_init__(self):
        object.__setattr__(self, 'and_mode', AndMode.parse(self.and_mode))
        if self.kernel % 2 == 0 or self.stem_kernel % 2 == 0:
            raise ContractError("Kernel sizes must be odd")
        if self.pool < 1 or self.image_height % self.pool or self.image_width % self.pool:
            raise ContractError(f"Image {self.image_height}x{self.image_width} is not divisible by pool {self.pool}")
        if min(self.block_count, self.channels, self.stem_channels, self.input_channels, self.class_count) < 1:
            raise ContractError("Counts in a CNN config must be at least 1")
        if not self.beta > 0 or not self.gamma > 0:
            raise ContractError("beta and gamma must be positive")

    @property
    def grid_height(self):
        return self.image_height // self.pool

    @property
    def grid_width(self):
        return self.image_width // self.pool

    @property
    def n_players(self):
        return self.grid_height * self.grid_width

    @property
    def total_units(self):
        return self.block_count * self.channels * self.n_players

    def block_input_channels(self, block):
        return self.stem_channels if block == 0 else self.channels


@dataclass(frozen=True)
class GridSample:
    """One image, stored as (channels x height x width)."""

    image: np.ndarray

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        if image.ndim == 2:
            image = image[None, :, :]
        if image.ndim != 3:
            raise ContractError(f"Images must be 2-D or 3-D arrays, got shape {image.shape}")
        object.__setattr__(self, 'image', image)


@dataclass
class FeatureTensor:
    values: np.ndarray
    layer: int


@dataclass
class StemLayer:
    """Convolution with bias, then non-overlapping max-pool, then ReLU."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)

    def forward(self, images, pool, keep=False):
        kernel = self.weights.shape[-1]
        image_windows = windows(images, kernel)
        conv = np.einsum('bchwij,ocij->bohw', image_windows, self.weights) + self.bias[None, :, None, None]
        batch, channels, height, width = conv.shape
        tiles = conv.reshape(batch, channels, height // pool, pool, width // pool, pool)
        tiles = tiles.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, height // pool, width // pool, pool * pool)
        pooled = tiles.max(axis=-1)
        out = np.where(pooled > 0.0, pooled, 0.0)
        if not keep:
            return out
        return out, {'windows': image_windows, 'tiles': tiles, 'pooled': pooled, 'pool': pool}


@dataclass
class ConvHarsanyiBlock:
    """
    A: (C_out x C_in x K x K) shared convolution weights.
    tau: (H x W x K x K), one selector per output location shared by its channels;
    candidates outside the grid are never selected.
    """

    weights: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.tau = np.asarray(self.tau, dtype=np.float64)
        kernel = self.weights.shape[-1]
        if self.tau.ndim != 4 or self.tau.shape[2:] != (kernel, kernel):
            raise ContractError(f"Selector shape {self.tau.shape} does not match kernel {kernel}")

    @property
    def kernel(self):
        return self.weights.shape[-1]

    @property
    def channels(self):
        return self.weights.shape[0]

    @property
    def inside(self):
        return inside_mask(self.tau.shape[0], self.tau.shape[1], self.kernel)

    @property
    def mask(self):
        return (self.tau > 0) & self.inside

    def channel_selectors(self):
        """Selector masks as seen by each output channel: (C x H x W x K x K)."""
        return np.broadcast_to(self.mask, (self.channels,) + self.mask.shape)

    def forward(self, inputs, gamma, mode, block_index=0, keep=False):
        """
        Args:
            inputs: (B x C_in x H x W) nonnegative activations

        Returns:
            (B x C_out x H x W) activations, plus a cache dict when keep=True
        """
        selected = self.mask
        counts = selected.sum(axis=(2, 3))
        input_windows = windows(inputs, self.kernel)
        linear = np.einsum('bchwij,hwij,ocij->bohw', input_windows, selected.astype(np.float64), self.weights)

        signal = np.mean(np.abs(inputs), axis=1)
        signal_windows = windows(signal, self.kernel)
        factors = None
        if mode == AndMode.HARD:
            passed = np.all((signal_windows != 0.0) | ~selected[None], axis=(-2, -1)) & (counts > 0)[None]
            gate = passed.astype(np.float64)
        else:
            factors = np.where(selected[None], np.tanh(gamma * signal_windows), 1.0)
            batch, height, width = signal.shape
            gate = geometric_mean(factors.reshape(batch, height, width, -1), counts)

        pre = linear * gate[:, None, :, :]
        out = np.where(pre > 0.0, pre, 0.0)
        if not np.all(np.isfinite(out)):
            raise NumericError(f"Non-finite activation in conv block {block_index}", where=(block_index,))
        if not keep:
            return out
        cache = {
            'inputs': inputs, 'windows': input_windows, 'selected': selected, 'counts': counts,
            'signal': signal, 'signal_windows': signal_windows, 'factors': factors,
            'gate': gate, 'linear': linear, 'pre': pre,
        }
        return out, cache


class HarsanyiCNN:
    """Stem, conv Harsanyi blocks and a bias-free linear head over every block."""

    topology = 'conv'

    def __init__(self, config, stem, blocks, head):
        self.config = config
        self.stem = stem
        self.blocks = list(blocks)
        self.head = head
        self.validate()

    def validate(self):
        cfg = self.config
        if self.stem.weights.shape != (cfg.stem_channels, cfg.input_channels, cfg.stem_kernel, cfg.stem_kernel):
            raise ContractError(f"Stem weights have shape {self.stem.weights.shape}")
        if self.stem.bias.shape != (cfg.stem_channels,):
            raise ContractError(f"Stem bias has shape {self.stem.bias.shape}")
        if len(self.blocks) != cfg.block_count:
            raise ContractError(f"Expected {cfg.block_count} blocks, got {len(self.blocks)}")
        for l, block in enumerate(self.blocks):
            expected = (cfg.channels, cfg.block_input_channels(l), cfg.kernel, cfg.kernel)
            if block.weights.shape != expected:
                raise ContractError(f"Block {l} weights have shape {block.weights.shape}, expected {expected}")
            if block.tau.shape != (cfg.grid_height, cfg.grid_width, cfg.kernel, cfg.kernel):
                raise ContractError(f"Block {l} selectors have shape {block.tau.shape}")
        if self.head.weights.shape != (cfg.class_count, cfg.total_units):
            raise ContractError(f"Head weights have shape {self.head.weights.shape}")

    @property
    def n_players(self):
        return self.config.n_players

    @property
    def class_count(self):
        return self.config.class_count

    def check_class_index(self, class_index):
        if not 0 <= int(class_index) < self.class_count:
            raise ContractError(f"class index {class_index} out of range 0..{self.class_count - 1}")

    def parameters(self):
        params = {'stem.weights': self.stem.weights, 'stem.bias': self.stem.bias}
        for l, block in enumerate(self.blocks):
            params[f'block{l}.weights'] = block.weights
            params[f'block{l}.tau'] = block.tau
        params['head.weights'] = self.head.weights
        return params

    def with_gamma(self, gamma):
        return HarsanyiCNN(replace(self.config, gamma=float(gamma)), self.stem, self.blocks, self.head)

    # ---- inference -------------------------------------------------------

    def stem_forward(self, sample):
        cfg = self.config
        expected = (cfg.input_channels, cfg.image_height, cfg.image_width)
        if sample.image.shape != expected:
            raise ContractError(f"Image has shape {sample.image.shape}, model expects {expected}")
        return FeatureTensor(self.stem.forward(sample.image[None], cfg.pool)[0], 0)

    def conv_block_forward(self, block, tensor, grid_mask=None, mode=None):
        """
        One block on one feature tensor. `grid_mask` (a PlayerSet over the
        locations) zeroes the masked locations of the input first.
        """
        mode = self.config.and_mode if mode is None else AndMode.parse(mode)
        values = tensor.values
        if grid_mask is not None:
            keep = grid_mask.to_mask().reshape(values.shape[1:])
            values = np.where(keep[None], values, 0.0)
        out = self.blocks[block].forward(values[None], self.config.gamma, mode, block_index=block)
        return FeatureTensor(out[0], tensor.layer + 1)

    def masked_inputs(self, sample, player_masks):
        player_masks = np.atleast_2d(np.asarray(player_masks, dtype=bool))
        if player_masks.shape[1] != self.n_players:
            raise ContractError(f"Mask covers {player_masks.shape[1]} locations, model has {self.n_players}")
        z0 = self.stem_forward(sample).values
        keep = player_masks.reshape(-1, 1, self.config.grid_height, self.config.grid_width)
        return np.where(keep, z0[None], 0.0)

    def units_from_inputs(self, inputs, mode):
        mode = AndMode.parse(mode)
        outputs = []
        current = inputs
        for l, block in enumerate(self.blocks):
            current = block.forward(current, self.config.gamma, mode, block_index=l)
            outputs.append(current)
        return outputs

    def units_batch(self, sample, player_masks, mode):
        mode = AndMode.parse(mode)
        return UnitActivations(self.units_from_inputs(self.masked_inputs(sample, player_masks), mode), mode)

    def output_batch(self, sample, player_masks, mode):
        activations = self.units_batch(sample, player_masks, mode)
        flat = np.concatenate([z.reshape(z.shape[0], -1) for z in activations.z], axis=1)
        return self.head.logits(flat)

    def forward_units(self, sample, mask=None, mode=None):
        mode = self.config.and_mode if mode is None else AndMode.parse(mode)
        mask = PlayerSet.full(self.n_players) if mask is None else mask
        batched = self.units_batch(sample, mask.to_mask()[None, :], mode)
        return UnitActivations([z[0] for z in batched.z], mode)

    def model_output(self, sample, mask=None, mode=None):
        mode = self.config.and_mode if mode is None else AndMode.parse(mode)
        mask = PlayerSet.full(self.n_players) if mask is None else mask
        return self.output_batch(sample, mask.to_mask()[None, :], mode)[0]

    def unit_values_batch(self, sample, player_masks, mode, unit):
        """z of one unit (l, c, h, w) for a batch of location masks."""
        block, channel, row, col = unit
        return self.units_batch(sample, player_masks, mode).z[block][:, channel, row, col]

    def gate_states(self, sample, player_masks, mode):
        """(B x L x H x W) AND-gate values per block and location."""
        mode = AndMode.parse(mode)
        current = self.masked_inputs(sample, player_masks)
        gates = []
        for l, block in enumerate(self.blocks):
            current, cache = block.forward(current, self.config.gamma, mode, block_index=l, keep=True)
            gates.append(cache['gate'])
        return np.stack(gates, axis=1)

    # ---- structure -------------------------------------------------------

    def grid_receptive_fields(self):
        """
        R per block and location, derived per output channel and checked to
        agree across channels.

        Raises:
            ChannelCoherenceError: two channels of one location disagree
        """
        cfg = self.config
        height, width, n = cfg.grid_height, cfg.grid_width, cfg.n_players
        previous = np.eye(n, dtype=bool).reshape(height, width, n)
        membership = []
        for l, block in enumerate(self.blocks):
            neighbourhoods = windows(previous.transpose(2, 0, 1), block.kernel)
            per_channel = [
                np.any(neighbourhoods & selectors[None], axis=(-2, -1)).transpose(1, 2, 0)
                for selectors in block.channel_selectors()
            ]
            for channel, fields in enumerate(per_channel[1:], start=1):
                if not np.array_equal(fields, per_channel[0]):
                    row, col = np.argwhere(np.any(fields != per_channel[0], axis=-1))[0]
                    raise ChannelCoherenceError(
                        f"Channel {channel} of block {l} has a different receptive field at ({row}, {col})"
                    )
            previous = per_channel[0]
            membership.append(previous.reshape(n, n))
        return ReceptiveFieldMap(membership, n)

    def receptive_fields(self):
        return self.grid_receptive_fields()

    def attribution_terms(self, sample, class_index, mode=None):
        """Location groups: fields per (block, location) and sum_c w_c * z_c per group."""
        self.check_class_index(class_index)
        cfg = self.config
        activations = self.forward_units(sample, None, mode)
        weights = self.head.weights[class_index].reshape(cfg.block_count, cfg.channels, cfg.grid_height, cfg.grid_width)
        contributions = np.stack([np.sum(weights[l] * z, axis=0) for l, z in enumerate(activations.z)])
        return self.grid_receptive_fields().flat(), contributions.reshape(-1)
