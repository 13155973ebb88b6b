"""
Diagnostics over a case's generator: monotonicity of re-execution,
locality of outputs and the cost of recording
"""
import gc
import logging
import time
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from greduce.cases.oracles import similarity_ratio
from greduce.cases.registry import CaseSpec
from greduce.core.prng import SplitMix64
from greduce.models.schemas import AlignmentStrategy
from greduce.models.trace import ReducedTrace, RemovalLabeling, TraceTree
from greduce.services.genlib import ReexecOutcome, aligned_reexecution, bare_execution, record_execution
from greduce.services.trace_service import build_trace_tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonotonicityReport:
    case: str
    trials: int
    completed_pairs: int
    violations: int
    examples: Tuple[Tuple[int, int], ...] = ()


@dataclass(frozen=True)
class LocalityReport:
    case: str
    trials: int
    pairs: int
    mean_similarity: float


@dataclass(frozen=True)
class OverheadReport:
    case: str
    runs: int
    median_record: float
    median_bare: float

    @property
    def ratio(self) -> float:
        return self.median_record / self.median_bare if self.median_bare > 0 else float("inf")


def _random_subset(prng: SplitMix64, units) -> List[int]:
    return [unit for unit in units if prng.below(2) == 1]


def _sample_tree(case: CaseSpec, prng: SplitMix64) -> TraceTree:
    trace, _ = record_execution(case.generator, prng.next_u64())
    return build_trace_tree(trace)


def _reexecute(case: CaseSpec, tree: TraceTree, removed, strategy: AlignmentStrategy, realign_seed: int
               ) -> ReexecOutcome:
    return aligned_reexecution(case.generator, ReducedTrace(tree, RemovalLabeling.of(removed)), strategy, realign_seed)


def monotonicity_probe(
    case: CaseSpec,
    trials: int,
    seed: int = 0,
    strategy: AlignmentStrategy = AlignmentStrategy.HALT,
) -> MonotonicityReport:
    """
    Check that removing more never yields a larger output.

    Each trial records the generator from a fresh seed, draws labelings
    L1 ⊆ L2 over its removable units and compares the output sizes whenever
    both re-executions complete.
    """
    prng = SplitMix64(seed)
    completed = 0
    violations: List[Tuple[int, int]] = []
    for _ in range(trials):
        tree = _sample_tree(case, prng)
        larger = _random_subset(prng, tree.units)
        smaller = _random_subset(prng, larger)
        realign_seed = prng.next_u64()
        first = _reexecute(case, tree, smaller, strategy, realign_seed)
        second = _reexecute(case, tree, larger, strategy, realign_seed)
        if not (first.completed and second.completed):
            continue
        completed += 1
        if second.input.total_size > first.input.total_size:
            violations.append((first.input.total_size, second.input.total_size))

    if violations:
        logger.warning(f"Monotonicity check on '{case.name}': {len(violations)} violations in {completed} pairs")
    return MonotonicityReport(case.name, trials, completed, len(violations), tuple(violations[:5]))


def locality_probe(
    case: CaseSpec,
    trials: int,
    seed: int = 0,
    strategy: AlignmentStrategy = AlignmentStrategy.HALT,
) -> LocalityReport:
    """Mean similarity between the outputs of a labeling and the same labeling with one more unit removed"""
    prng = SplitMix64(seed)
    ratios: List[float] = []
    for _ in range(trials):
        tree = _sample_tree(case, prng)
        removed = _random_subset(prng, tree.units)
        base = _reexecute(case, tree, removed, strategy, 0)
        if not base.completed:
            continue
        kept = [unit for unit in tree.units if unit not in removed]
        if not kept:
            continue
        extra = kept[prng.below(len(kept))]
        neighbour = _reexecute(case, tree, removed + [extra], strategy, 0)
        if neighbour.completed:
            ratios.append(similarity_ratio(base.input.text, neighbour.input.text))

    mean = float(np.mean(ratios)) if ratios else float("nan")
    logger.info(f"Locality check on '{case.name}': mean similarity {mean:.3f} over {len(ratios)} pairs")
    return LocalityReport(case.name, trials, len(ratios), mean)


def measure_overhead(case: CaseSpec, runs: int = 1000, repeats: int = 5) -> OverheadReport:
    """
    Wall time of a recorded generation against an unrecorded one over seeds 0..runs-1.

    The sweep is repeated `repeats` times with the collector paused, as timeit
    does, and the per-sweep means are reduced to their median.
    """
    record_means = np.empty(repeats)
    bare_means = np.empty(repeats)
    record_times = np.empty(runs)
    bare_times = np.empty(runs)
    collecting = gc.isenabled()
    gc.disable()
    try:
        for sweep in range(repeats):
            for seed in range(runs):
                started = time.perf_counter()
                bare_execution(case.generator, seed)
                bare_times[seed] = time.perf_counter() - started

                started = time.perf_counter()
                record_execution(case.generator, seed)
                record_times[seed] = time.perf_counter() - started
            record_means[sweep] = record_times.mean()
            bare_means[sweep] = bare_times.mean()
    finally:
        if collecting:
            gc.enable()

    report = OverheadReport(case.name, runs, float(np.median(record_means)), float(np.median(bare_means)))
    logger.info(f"Recording overhead on '{case.name}': x{report.ratio:.2f} (median of {repeats} sweeps)")
    return report
