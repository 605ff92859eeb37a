"""可复现的并行随机流

一个 64 位主种子；第 i 个批次使用 SeedSequence([seed, i]) 派生的独立子流。
批次划分只依赖 (samples, batch_size)，与线程数无关。
"""
import numpy as np


def substream(seed: int, index: int) -> np.random.Generator:
    """第 index 个批次的随机流"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def partition(samples: int, batch_size: int) -> list[int]:
    """把 samples 条路径切成定长批次，最后一批取余数"""
    if samples <= 0:
        return []
    full, rest = divmod(samples, batch_size)
    sizes = [batch_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def derive_seed(seed: int, index: int) -> int:
    """第 index 个独立任务（如网格点）的 64 位种子"""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0])
