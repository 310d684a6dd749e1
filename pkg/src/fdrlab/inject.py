"""Flat SEU fault-injection campaigns and measured FDR per flip-flop.

A run fails when any primary output differs from the golden run at any
cycle of the observe window. FDR = failing runs / runs.

Statistical flip cycles are drawn uniformly with replacement from the
active window. Each flip-flop owns an independent random stream keyed by
(master seed, CRC-32 of its name), so the j-th draw for a flip-flop does not
depend on which other flip-flops are injected, in what order, or by how
many workers.
"""
from __future__ import annotations

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, join, stratified_split
from .errors import CycleOutOfRange, EmptyActiveWindow, ShapeMismatch, UnknownFlipFlop
from .netlist import Netlist
from .sim import CompiledNetlist, GoldenTrace, Stimulus

log = logging.getLogger(__name__)

PASS = "pass"
FUNCTIONAL_FAILURE = "functional_failure"

#: upper bound on simultaneously simulated runs in one batch
MAX_LANES = 16384


@dataclass(frozen=True)
class CampaignConfig:
    injections_per_ff: int = 170
    active_window: Optional[Tuple[int, int]] = None  # inclusive; None -> whole stimulus
    seed: int = 0
    mode: str = "statistical"  # or "exhaustive"

    def __post_init__(self):
        if self.mode not in ("statistical", "exhaustive"):
            raise ValueError(f"unknown campaign mode {self.mode!r}")
        if self.mode == "statistical" and self.injections_per_ff < 1:
            raise ValueError("injections_per_ff must be >= 1")


@dataclass(frozen=True)
class FdrRecord:
    ff_name: str
    injections: int
    failures: int

    @property
    def fdr(self) -> float:
        return self.failures / self.injections


def classify(golden: GoldenTrace, observed: GoldenTrace) -> str:
    if golden.values.shape != observed.values.shape or golden.window != observed.window:
        raise ShapeMismatch(
            f"trace shapes differ: {golden.values.shape} vs {observed.values.shape}"
        )
    if np.array_equal(golden.values, observed.values):
        return PASS
    return FUNCTIONAL_FAILURE


def _stream(seed: int, ff: str) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & (2**64 - 1), spawn_key=(zlib.crc32(ff.encode()),))
    return np.random.default_rng(ss)


def flip_cycles(config: CampaignConfig, ff: str, window: Tuple[int, int]) -> np.ndarray:
    lo, hi = window
    if config.mode == "exhaustive":
        return np.arange(lo, hi + 1)
    return _stream(config.seed, ff).integers(lo, hi + 1, size=config.injections_per_ff)


def _resolve_window(config: CampaignConfig, stimulus: Stimulus) -> Tuple[int, int]:
    lo, hi = config.active_window if config.active_window is not None else (0, stimulus.cycles - 1)
    if hi < lo:
        raise EmptyActiveWindow(f"active window {lo}..{hi} is empty")
    if lo < 0 or hi >= stimulus.cycles:
        raise CycleOutOfRange(f"active window {lo}..{hi} outside [0, {stimulus.cycles})")
    return lo, hi


def _run_batches(sim: CompiledNetlist, stimulus: Stimulus, golden: np.ndarray,
                 tasks: List[Tuple[int, np.ndarray]]) -> List[int]:
    """Failure counts for ``tasks`` = [(ff index, flip cycles), ...]."""
    failures = [0] * len(tasks)
    start = 0
    while start < len(tasks):
        stop, lanes = start, 0
        while stop < len(tasks) and (lanes == 0 or lanes + len(tasks[stop][1]) <= MAX_LANES):
            lanes += len(tasks[stop][1])
            stop += 1
        ffs = np.concatenate([np.full(len(c), i) for i, c in tasks[start:stop]])
        cycles = np.concatenate([c for _, c in tasks[start:stop]])
        res = sim.simulate(stimulus, lanes=lanes, flip_ff=ffs, flip_cycle=cycles,
                           golden=golden, record_outputs=False)
        pos = 0
        for k in range(start, stop):
            n = len(tasks[k][1])
            failures[k] = int(res["failed"][pos:pos + n].sum())
            pos += n
        start = stop
    return failures


def _worker(args):
    netlist, stimulus, golden, tasks = args
    return _run_batches(CompiledNetlist(netlist), stimulus, golden, tasks)


def run_campaign(
    netlist: Netlist,
    stimulus: Stimulus,
    config: CampaignConfig,
    flip_flops: Optional[Sequence[str]] = None,
    jobs: int = 1,
) -> List[FdrRecord]:
    """Inject every flip-flop (or the given subset) and measure its FDR.

    Returns records sorted by flip-flop name. Results do not depend on
    ``jobs``.
    """
    sim = CompiledNetlist(netlist)
    window = _resolve_window(config, stimulus)
    targets = sorted(flip_flops) if flip_flops is not None else list(sim.flip_flops)
    for ff in targets:
        if ff not in sim.flip_flops:
            raise UnknownFlipFlop(f"no flip-flop named {ff!r}")
    golden = sim.golden_outputs(stimulus)
    tasks = [(sim.ff_index(ff), flip_cycles(config, ff, window)) for ff in targets]
    log.info("injecting %d flip-flops, %d runs", len(tasks), sum(len(c) for _, c in tasks))

    if jobs > 1 and len(tasks) > 1:
        chunks = [tasks[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_worker, [(netlist, stimulus, golden, c) for c in chunks]))
        failures = [0] * len(tasks)
        for i, part in enumerate(parts):
            failures[i::jobs] = part
    else:
        failures = _run_batches(sim, stimulus, golden, tasks)

    return [
        FdrRecord(ff, len(cycles), fails)
        for ff, (_, cycles), fails in zip(targets, tasks, failures)
    ]


def split_dataset(records: Sequence[FdrRecord], features: Dict, training_size: float,
                  seed: int) -> Tuple[Dataset, Dataset]:
    """Stratified train/test split with |train| = round(training_size * N)."""
    data = join(features, {r.ff_name: r.fdr for r in records})
    train, test = stratified_split(data.y, training_size, seed)
    return data.subset(train), data.subset(test)
