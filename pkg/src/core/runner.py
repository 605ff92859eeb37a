"""批次并行执行与充分统计量合并

每个批次拿到自己的随机子流，在线程池中执行；结果按批次序号合并，
因此相同种子在任意线程数下得到逐位相同的结果。
"""
import concurrent.futures
import logging
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np

from src.config import get_settings
from src.core.rng import partition, substream

logger = logging.getLogger(__name__)

T = TypeVar("T")

BatchFn = Callable[[np.random.Generator, int], T]


@dataclass(frozen=True)
class WeightSums:
    """加权指示估计的充分统计量"""
    sum_w: float = 0.0
    sum_w2: float = 0.0
    n: int = 0
    n_censored: int = 0

    @classmethod
    def of(cls, w: np.ndarray, n_censored: int = 0) -> "WeightSums":
        return cls(float(np.sum(w)), float(np.sum(w * w)), int(w.size), int(n_censored))

    def __add__(self, other: "WeightSums") -> "WeightSums":
        return WeightSums(
            self.sum_w + other.sum_w,
            self.sum_w2 + other.sum_w2,
            self.n + other.n,
            self.n_censored + other.n_censored,
        )


def _resolve(threads: int | None, batch_size: int | None) -> tuple[int, int]:
    settings = get_settings()
    threads = threads or settings.effective_threads
    batch_size = batch_size or settings.batch_size
    return max(1, threads), max(1, batch_size)


def _run_indexed(fn: BatchFn, jobs: list[tuple[int, int]], seed: int, threads: int) -> list:
    """执行 (批次序号, 批次大小) 列表，结果按输入顺序返回"""
    if threads == 1 or len(jobs) <= 1:
        return [fn(substream(seed, i), size) for i, size in jobs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, substream(seed, i), size) for i, size in jobs]
        return [f.result() for f in futures]


def run_batches(fn: BatchFn, samples: int, seed: int,
                threads: int | None = None, batch_size: int | None = None) -> list:
    """对固定划分的全部批次执行 fn(rng, size)，按批次序号返回结果"""
    threads, batch_size = _resolve(threads, batch_size)
    sizes = partition(samples, batch_size)
    logger.debug(f"[并行] {samples} 条路径 → {len(sizes)} 批，{threads} 线程")
    return _run_indexed(fn, list(enumerate(sizes)), seed, threads)


def run_sums(fn: Callable[[np.random.Generator, int], WeightSums], samples: int, seed: int,
             threads: int | None = None, batch_size: int | None = None) -> WeightSums:
    """执行全部批次并按序号顺序累加充分统计量"""
    total = WeightSums()
    for part in run_batches(fn, samples, seed, threads, batch_size):
        total = total + part
    return total


def collect_until(fn: BatchFn, count: Callable[[T], int], target: int, seed: int, max_batches: int,
                  threads: int | None = None, batch_size: int | None = None) -> list:
    """按批次序号逐批收集，直到累计 count ≥ target 或达到 max_batches

    每轮并发执行 threads 个批次，但只保留序号前缀，结果与线程数无关。
    """
    threads, batch_size = _resolve(threads, batch_size)
    results: list = []
    collected = 0
    next_index = 0
    while collected < target and next_index < max_batches:
        wave = [(i, batch_size) for i in range(next_index, min(next_index + threads, max_batches))]
        next_index += len(wave)
        for part in _run_indexed(fn, wave, seed, threads):
            results.append(part)
            collected += count(part)
            if collected >= target:
                break
    if collected < target:
        logger.warning(f"[并行] 达到批次上限 {max_batches}，仅收集到 {collected}/{target}")
    return results
