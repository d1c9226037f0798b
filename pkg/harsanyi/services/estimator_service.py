"""
Estimator Service Layer

Sampling baselines for Shapley values, all charged per oracle call:
- Permutation sampling (n + 1 calls per permutation, prefixes evaluated once)
- Antithetical sampling ((pi, reversed pi) pairs)
- KernelSHAP with optional paired sampling, efficiency enforced exactly
- RMSE between two attribution vectors

Every estimator accepts exhaustive=True, which enumerates all permutations
or all proper coalitions (with exact kernel weights) instead of sampling.
"""

import itertools
import logging
import math

import numpy as np

from harsanyi.errors import BudgetError, ContractError, RankError
from harsanyi.models.experiment import EstimateRecord
from harsanyi.models.game import AttributionVector, Provenance
from harsanyi.services.oracles import CountingOracle
from harsanyi.utils.bitmask import membership_matrix, popcounts
from harsanyi.utils.rng import ESTIMATOR, ESTIMATOR_IDS, substream

logger = logging.getLogger(__name__)


def _rng(name, budget):
    return substream(budget.seed, ESTIMATOR, ESTIMATOR_IDS[name], *budget.stream_keys)


def _prefix_bits(permutation):
    """Coalition bitmasks of every prefix of a permutation, empty prefix first."""
    bits = np.zeros(len(permutation) + 1, dtype=np.int64)
    bits[1:] = np.cumsum(np.left_shift(np.int64(1), np.asarray(permutation, dtype=np.int64)))
    return bits


def _accumulate_permutation(oracle, permutation, totals):
    values = oracle.values(_prefix_bits(permutation))
    totals[np.asarray(permutation)] += np.diff(values)


def _counted(oracle):
    return oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)


def shapley_kernel_weight(n, size):
    """(n - 1) / (C(n, s) * s * (n - s)) for a proper coalition of size s."""
    return (n - 1) / (math.comb(n, size) * size * (n - size))


class EstimatorService:
    """Service class for sampling-based Shapley estimators"""

    @staticmethod
    def permutation_sampling(oracle, n, budget, exhaustive=False):
        """
        Average marginal contributions along random player orderings.

        Raises:
            BudgetError: budget below n + 1
        """
        counter = _counted(oracle)
        start = counter.count
        totals = np.zeros(n, dtype=np.float64)
        if exhaustive:
            permutations = list(itertools.permutations(range(n)))
        else:
            if budget.max_inferences < n + 1:
                raise BudgetError(f"Permutation sampling needs at least {n + 1} inferences, got {budget.max_inferences}")
            rng = _rng('sampling', budget)
            permutations = [rng.permutation(n) for _ in range(budget.max_inferences // (n + 1))]
        for permutation in permutations:
            _accumulate_permutation(counter, permutation, totals)
        used = counter.count - start
        logger.debug(f"sampling: {len(permutations)} permutations, {used} inferences")
        return EstimateRecord(AttributionVector(totals / len(permutations), Provenance.ESTIMATOR, used), used, 'sampling')

    @staticmethod
    def antithetical_sampling(oracle, n, budget, exhaustive=False):
        """
        Permutation sampling with every draw paired with its reversal.

        Raises:
            BudgetError: budget below 2(n + 1)
        """
        counter = _counted(oracle)
        start = counter.count
        totals = np.zeros(n, dtype=np.float64)
        if exhaustive:
            firsts = list(itertools.permutations(range(n)))
        else:
            if budget.max_inferences < 2 * (n + 1):
                raise BudgetError(f"Antithetical sampling needs at least {2 * (n + 1)} inferences, "
                                  f"got {budget.max_inferences}")
            rng = _rng('antithetical', budget)
            firsts = [rng.permutation(n) for _ in range(budget.max_inferences // (2 * (n + 1)))]
        for permutation in firsts:
            permutation = np.asarray(permutation)
            _accumulate_permutation(counter, permutation, totals)
            _accumulate_permutation(counter, permutation[::-1], totals)
        phi = totals / (2 * len(firsts))
        return EstimateRecord(AttributionVector(phi, Provenance.ESTIMATOR, counter.count - start),
                              counter.count - start, 'antithetical')

    @staticmethod
    def _sample_coalitions(n, draws, paired, rng):
        sizes = np.arange(1, n)
        mass = (n - 1) / (sizes * (n - sizes))
        mass = mass / mass.sum()
        bits = []
        rounds = draws // 2 if paired else draws
        full = (1 << n) - 1
        for size in rng.choice(sizes, size=rounds, p=mass):
            members = rng.choice(n, size=int(size), replace=False)
            b = int(np.sum(np.left_shift(np.int64(1), members.astype(np.int64))))
            bits.append(b)
            if paired:
                bits.append(full ^ b)
        return np.array(bits, dtype=np.int64)

    @staticmethod
    def solve_constrained(design, targets, weights, total):
        """
        Weighted least squares for phi subject to sum(phi) = total, through the
        KKT system [[2 X'WX, 1], [1', 0]] [phi; lambda] = [2 X'W y; total].

        Raises:
            RankError: the system is singular
        """
        n = design.shape[1]
        weighted = design.T * weights[None, :]
        system = np.zeros((n + 1, n + 1))
        system[:n, :n] = 2.0 * weighted @ design
        system[:n, n] = 1.0
        system[n, :n] = 1.0
        rhs = np.empty(n + 1)
        rhs[:n] = 2.0 * weighted @ targets
        rhs[n] = total
        if np.linalg.matrix_rank(system) < n + 1:
            raise RankError(f"KernelSHAP system is singular (rank below {n + 1})")
        try:
            return np.linalg.solve(system, rhs)[:n]
        except np.linalg.LinAlgError as e:
            raise RankError(f"KernelSHAP system is singular: {e}")

    @staticmethod
    def kernelshap(oracle, n, budget, paired=False, exhaustive=False):
        """
        Shapley values as the efficiency-constrained weighted regression of
        V(S) on coalition indicators, with coalitions drawn from the Shapley kernel.

        V(empty) and V(N) are always evaluated (2 inferences); the rest of the
        budget goes to sampled coalitions, drawn as (S, N minus S) pairs when paired.

        Raises:
            BudgetError: budget below n + 2
            RankError: fewer distinct coalitions than players, or a singular system
        """
        name = 'kernelshap-ps' if paired else 'kernelshap'
        counter = _counted(oracle)
        start = counter.count
        full = (1 << n) - 1
        if not exhaustive and budget.max_inferences < n + 2:
            raise BudgetError(f"KernelSHAP needs at least {n + 2} inferences, got {budget.max_inferences}")
        ends = counter.values(np.array([0, full], dtype=np.int64))
        grand = float(ends[1] - ends[0])
        if n == 1:
            phi = np.array([grand])
            return EstimateRecord(AttributionVector(phi, Provenance.ESTIMATOR, counter.count - start),
                                  counter.count - start, name)

        if exhaustive:
            bits = np.arange(1, full, dtype=np.int64)
            sizes = popcounts(n)[1:full]
            weights = np.array([shapley_kernel_weight(n, int(s)) for s in sizes])
        else:
            bits = EstimatorService._sample_coalitions(n, budget.max_inferences - 2, paired, _rng(name, budget))
            weights = np.ones(bits.shape[0], dtype=np.float64)
            distinct = np.unique(bits).shape[0]
            if distinct < n:
                raise RankError(f"Only {distinct} distinct coalitions for n={n} players")

        targets = counter.values(bits) - ends[0]
        phi = EstimatorService.solve_constrained(membership_matrix(bits, n).astype(np.float64), targets, weights, grand)
        return EstimateRecord(AttributionVector(phi, Provenance.ESTIMATOR, counter.count - start),
                              counter.count - start, name)

    @staticmethod
    def run(name, oracle, n, budget, exhaustive=False):
        """Dispatch by estimator name."""
        if name == 'sampling':
            return EstimatorService.permutation_sampling(oracle, n, budget, exhaustive)
        if name == 'antithetical':
            return EstimatorService.antithetical_sampling(oracle, n, budget, exhaustive)
        if name == 'kernelshap':
            return EstimatorService.kernelshap(oracle, n, budget, paired=False, exhaustive=exhaustive)
        if name == 'kernelshap-ps':
            return EstimatorService.kernelshap(oracle, n, budget, paired=True, exhaustive=exhaustive)
        raise ContractError(f"Unknown estimator '{name}'")

    @staticmethod
    def minimum_budget(name, n):
        return {'sampling': n + 1, 'antithetical': 2 * (n + 1)}.get(name, n + 2)

    @staticmethod
    def rmse(estimate, truth):
        """(1 / sqrt(n)) * ||phi - phi*||."""
        phi = estimate.phi if isinstance(estimate, AttributionVector) else np.asarray(estimate, dtype=np.float64)
        reference = truth.phi if isinstance(truth, AttributionVector) else np.asarray(truth, dtype=np.float64)
        if phi.shape != reference.shape:
            raise ContractError(f"Cannot compare attributions of lengths {phi.shape[0]} and {reference.shape[0]}")
        return float(np.linalg.norm(phi - reference) / math.sqrt(phi.shape[0]))
