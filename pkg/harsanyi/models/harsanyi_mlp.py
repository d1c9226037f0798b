# harsanyi_mlp.py
"""
Harsanyi-MLP: cascaded blocks of Harsanyi units.

Each unit (l, u) selects a child set from a candidate pool through its
selector tau (child j is selected iff tau_j > 0), then applies

    g = A_u . (selected children)            linear, no bias
    h = g * AND(children)                    hard indicator or soft tanh surrogate
    z = ReLU(h)

and the class logits are a bias-free linear read-out of every unit of every
block. Masked players enter as exact zeros and the AND propagates them, so a
unit is nonzero only when its whole receptive field is present.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from harsanyi.config import get_config
from harsanyi.errors import ContractError, NumericError
from harsanyi.models.player_set import PlayerSet
from harsanyi.utils.bitmask import bits_from_row


class ChildrenScope(str, Enum):
    PREVIOUS_BLOCK_ONLY = 'previous_block_only'
    ALL_PREVIOUS_BLOCKS = 'all_previous_blocks'


class AndMode(str, Enum):
    HARD = 'hard_and'
    SOFT = 'soft_and'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {'hard': cls.HARD, 'soft': cls.SOFT}
        if value in aliases:
            return aliases[value]
        return cls(value)


@dataclass(frozen=True)
class ModelConfig:
    """
    Topology and hyperparameters of a Harsanyi-MLP.

    n_inputs counts input columns; player_groups partitions the columns into
    players (one-hot groups are masked together). Without groups every
    column is its own player.
    """

    n_inputs: int
    block_sizes: Tuple[int, ...]
    class_count: int
    beta: float = 10.0
    gamma: float = 100.0
    children_scope: ChildrenScope = ChildrenScope.PREVIOUS_BLOCK_ONLY
    and_mode: AndMode = AndMode.SOFT
    player_groups: Optional[Tuple[Tuple[int, ...], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'block_sizes', tuple(int(m) for m in self.block_sizes))
        object.__setattr__(self, 'children_scope', ChildrenScope(self.children_scope))
        object.__setattr__(self, 'and_mode', AndMode.parse(self.and_mode))
        if self.n_inputs < 1:
            raise ContractError("n_inputs must be at least 1")
        if len(self.block_sizes) < 1 or min(self.block_sizes) < 1:
            raise ContractError("Need at least one block and at least one unit per block")
        if self.class_count < 1:
            raise ContractError("class_count must be at least 1")
        if not self.beta > 0 or not self.gamma > 0:
            raise ContractError("beta and gamma must be positive")
        if self.player_groups is not None:
            groups = tuple(tuple(int(c) for c in group) for group in self.player_groups)
            columns = sorted(c for group in groups for c in group)
            if columns != list(range(self.n_inputs)) or any(len(group) == 0 for group in groups):
                raise ContractError("player_groups must partition the input columns into nonempty groups")
            object.__setattr__(self, 'player_groups', groups)

    @property
    def block_count(self):
        return len(self.block_sizes)

    @property
    def n_players(self):
        return self.n_inputs if self.player_groups is None else len(self.player_groups)

    @property
    def total_units(self):
        return sum(self.block_sizes)

    def groups(self):
        if self.player_groups is None:
            return tuple((c,) for c in range(self.n_inputs))
        return self.player_groups

    def column_owner(self):
        """Player index owning each input column."""
        owner = np.empty(self.n_inputs, dtype=np.int64)
        for player, group in enumerate(self.groups()):
            owner[list(group)] = player
        return owner

    def pool_size(self, block):
        """M^(l): size of the candidate pool of block `block` (0-based)."""
        if block == 0:
            return self.n_inputs
        if self.children_scope == ChildrenScope.PREVIOUS_BLOCK_ONLY:
            return self.block_sizes[block - 1]
        return sum(self.block_sizes[:block])


@dataclass(frozen=True)
class Sample:
    """One input x with its baseline b; z^(0) = x - b."""

    x: np.ndarray
    baseline: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        b = np.zeros_like(x) if self.baseline is None else np.asarray(self.baseline, dtype=np.float64).reshape(-1)
        if b.shape != x.shape:
            raise ContractError(f"Baseline shape {b.shape} does not match sample shape {x.shape}")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'baseline', b)

    @property
    def z0(self):
        return self.x - self.baseline


@dataclass(frozen=True)
class ChildSelector:
    """Selector of one unit: child j is selected iff tau_j > 0 (tau = 0 rejects)."""

    tau: np.ndarray

    @property
    def mask(self):
        return self.tau > 0

    def children(self):
        return np.flatnonzero(self.mask)


@dataclass
class HarsanyiBlock:
    """A: (m x M) weights; tau: (m x M) selector parameters. No biases."""

    weights: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.tau = np.asarray(self.tau, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape != self.tau.shape:
            raise ContractError(f"Block weights {self.weights.shape} and tau {self.tau.shape} must be equal 2-D shapes")

    @property
    def unit_count(self):
        return self.weights.shape[0]

    @property
    def pool_size(self):
        return self.weights.shape[1]

    @property
    def mask(self):
        return self.tau > 0

    def selector(self, unit):
        return ChildSelector(self.tau[unit])

    def child_counts(self):
        return self.mask.sum(axis=1)

    def gather_plan(self):
        """
        Padded child index table: row u lists the selected children of unit u
        in ascending order, padded with the sentinel index M (a zero column).
        """
        mask = self.mask
        counts = mask.sum(axis=1)
        width = max(int(counts.max()) if counts.size else 0, 1)
        order = np.argsort(~mask, axis=1, kind='stable')[:, :width]
        valid = np.take_along_axis(mask, order, axis=1)
        index = np.where(valid, order, self.pool_size)
        weights = np.where(valid, np.take_along_axis(self.weights, order, axis=1), 0.0)
        return index, valid, weights, counts

    def forward(self, children, gamma, mode, block_index=0, keep=False):
        """
        Apply linear, AND and ReLU to a batch of candidate-pool activations.

        Args:
            children: (B x M) pool activations
            gamma: soft-AND sharpness
            mode: AndMode
            keep: also return the intermediates needed for backpropagation

        Returns:
            (B x m) activations, plus a cache dict when keep=True
        """
        index, valid, weights, counts = self.gather_plan()
        batch = children.shape[0]
        padded = np.concatenate([children, np.zeros((batch, 1))], axis=1)
        gathered = padded[:, index]
        linear = np.sum(gathered * weights[None, :, :], axis=-1)

        factors = None
        if mode == AndMode.HARD:
            passed = np.all((gathered != 0.0) | ~valid[None, :, :], axis=-1) & (counts > 0)[None, :]
            gate = passed.astype(np.float64)
        else:
            factors = np.where(valid[None, :, :], np.tanh(gamma * np.abs(gathered)), 1.0)
            gate = geometric_mean(factors, counts)

        pre = linear * gate
        out = np.where(pre > 0.0, pre, 0.0)
        if not np.all(np.isfinite(out)):
            unit = int(np.flatnonzero(~np.all(np.isfinite(out), axis=0))[0])
            raise NumericError(f"Non-finite activation at unit ({block_index}, {unit})", where=(block_index, unit))
        if not keep:
            return out
        cache = {
            'index': index, 'valid': valid, 'counts': counts, 'gathered': gathered,
            'factors': factors, 'gate': gate, 'linear': linear, 'pre': pre, 'children': children,
        }
        return out, cache


def geometric_mean(factors, counts):
    """
    [prod of the selected factors]^(1/count) over the last axis.

    Unselected slots must already hold 1.0. Units with more children than the
    log-space threshold are evaluated as exp(mean log), with an exact 0 when
    any factor is 0. Units without children gate to 0.
    """
    threshold = get_config().SOFT_AND_LOG_THRESHOLD
    safe_counts = np.maximum(counts, 1).astype(np.float64)
    linear_space = np.prod(factors, axis=-1) ** (1.0 / safe_counts)
    if np.any(counts > threshold):
        has_zero = np.any(factors == 0.0, axis=-1)
        logs = np.log(np.where(factors > 0.0, factors, 1.0))
        log_space = np.where(has_zero, 0.0, np.exp(np.sum(logs, axis=-1) / safe_counts))
        linear_space = np.where(counts > threshold, log_space, linear_space)
    return np.where(counts > 0, linear_space, 0.0)


@dataclass
class OutputHead:
    """Per-class weights over all units of all blocks, block-major. No bias."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ContractError("Head weights must be (class_count x total_units)")

    def logits(self, units):
        return np.sum(units[:, None, :] * self.weights[None, :, :], axis=-1)


@dataclass
class UnitActivations:
    """z per block; single sample entries are 1-D, batched entries are (B x m)."""

    z: List[np.ndarray]
    mode: AndMode

    def flat(self):
        return np.concatenate(self.z, axis=-1)

    def unit(self, block, unit):
        return self.z[block][..., unit]


@dataclass
class ReceptiveFieldMap:
    """membership[l][u, i] is True iff player i is in R_u^(l)."""

    membership: List[np.ndarray]
    n: int

    def field(self, block, unit):
        return PlayerSet(bits_from_row(self.membership[block][unit]), self.n)

    def sizes(self, block):
        return self.membership[block].sum(axis=1)

    def flat(self):
        return np.concatenate(self.membership, axis=0)

    def distinct_fields(self, include_empty=False):
        fields = {bits_from_row(row) for row in self.flat()}
        if not include_empty:
            fields.discard(0)
        return fields

    def entries(self):
        for block, table in enumerate(self.membership):
            for unit in range(table.shape[0]):
                yield block, unit, self.field(block, unit)


class HarsanyiMLP:
    """The Harsanyi-MLP: blocks, output head and masked inference."""

    topology = 'mlp'

    def __init__(self, config, blocks, head):
        self.config = config
        self.blocks = list(blocks)
        self.head = head
        self.validate()

    def validate(self):
        cfg = self.config
        if len(self.blocks) != cfg.block_count:
            raise ContractError(f"Expected {cfg.block_count} blocks, got {len(self.blocks)}")
        for l, block in enumerate(self.blocks):
            expected = (cfg.block_sizes[l], cfg.pool_size(l))
            if block.weights.shape != expected:
                raise ContractError(f"Block {l} weights have shape {block.weights.shape}, expected {expected}")
        if self.head.weights.shape != (cfg.class_count, cfg.total_units):
            raise ContractError(f"Head weights have shape {self.head.weights.shape}, "
                                f"expected {(cfg.class_count, cfg.total_units)}")

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
        params = {}
        for l, block in enumerate(self.blocks):
            params[f'block{l}.weights'] = block.weights
            params[f'block{l}.tau'] = block.tau
        params['head.weights'] = self.head.weights
        return params

    # ---- inference -------------------------------------------------------

    def masked_inputs(self, sample, player_masks):
        """z^(0) rows with every column of every masked player set to exactly 0."""
        player_masks = np.atleast_2d(np.asarray(player_masks, dtype=bool))
        if player_masks.shape[1] != self.n_players:
            raise ContractError(f"Mask covers {player_masks.shape[1]} players, model has {self.n_players}")
        if sample.x.shape[0] != self.config.n_inputs:
            raise ContractError(f"Sample has {sample.x.shape[0]} columns, model expects {self.config.n_inputs}")
        column_masks = player_masks[:, self.config.column_owner()]
        return np.where(column_masks, sample.z0[None, :], 0.0)

    def children_of(self, block, inputs, outputs):
        if block == 0:
            return inputs
        if self.config.children_scope == ChildrenScope.PREVIOUS_BLOCK_ONLY:
            return outputs[block - 1]
        return np.concatenate(outputs[:block], axis=1)

    def units_from_inputs(self, inputs, mode):
        mode = AndMode.parse(mode)
        outputs = []
        for l, block in enumerate(self.blocks):
            outputs.append(block.forward(self.children_of(l, inputs, outputs), self.config.gamma, mode, block_index=l))
        return outputs

    def units_batch(self, sample, player_masks, mode):
        mode = AndMode.parse(mode)
        return UnitActivations(self.units_from_inputs(self.masked_inputs(sample, player_masks), mode), mode)

    def output_batch(self, sample, player_masks, mode):
        activations = self.units_batch(sample, player_masks, mode)
        return self.head.logits(activations.flat())

    def forward_units(self, sample, mask=None, mode=None):
        """Unit activations z_u^(l)(x_mask) for one sample (mask defaults to N)."""
        mode = self.config.and_mode if mode is None else AndMode.parse(mode)
        mask = PlayerSet.full(self.n_players) if mask is None else mask
        batched = self.units_batch(sample, mask.to_mask()[None, :], mode)
        return UnitActivations([z[0] for z in batched.z], mode)

    def model_output(self, sample, mask=None, mode=None):
        """Class logits v(x_mask)."""
        activations = self.forward_units(sample, mask, mode)
        return self.head.logits(activations.flat()[None, :])[0]

    def unit_values_batch(self, sample, player_masks, mode, unit):
        """z_u^(l)(x_S) of one unit (l, u) for a batch of player masks."""
        block, index = unit
        return self.units_batch(sample, player_masks, mode).z[block][:, index]

    def unit_ids(self):
        return [(l, u) for l, size in enumerate(self.config.block_sizes) for u in range(size)]

    def with_gamma(self, gamma):
        """Same parameters, different soft-AND sharpness."""
        return HarsanyiMLP(replace(self.config, gamma=float(gamma)), self.blocks, self.head)

    # ---- structure -------------------------------------------------------

    def receptive_fields(self):
        """R_u^(l) for every unit: selected inputs for block 0, union of children fields above."""
        cfg = self.config
        groups = np.zeros((cfg.n_players, cfg.n_inputs), dtype=np.int64)
        for player, group in enumerate(cfg.groups()):
            groups[player, list(group)] = 1
        membership = []
        for l, block in enumerate(self.blocks):
            selected = block.mask.astype(np.int64)
            if l == 0:
                pool = groups.T
            elif cfg.children_scope == ChildrenScope.PREVIOUS_BLOCK_ONLY:
                pool = membership[l - 1].astype(np.int64)
            else:
                pool = np.concatenate(membership[:l], axis=0).astype(np.int64)
            membership.append((selected @ pool) > 0)
        return ReceptiveFieldMap(membership, cfg.n_players)

    def attribution_terms(self, sample, class_index, mode=None):
        """
        Per-unit receptive fields and credits w_{v,u} * z_u(x).

        Returns:
            (U x n) bool membership, (U,) contributions
        """
        self.check_class_index(class_index)
        activations = self.forward_units(sample, None, mode)
        contributions = self.head.weights[class_index] * activations.flat()
        return self.receptive_fields().flat(), contributions
