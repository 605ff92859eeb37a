"""永续序列路径模拟

递推: Y_n = Y_{n-1} + Π_{n-1} B_n,  Π_n = Π_{n-1} A_n,  M_n = max(M_{n-1}, Y_n)
Π 只在对数尺度上记录；Y、M 用线性尺度。首次 Y_n > u 即停止。
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import DomainError
from src.core.laws import sample_a, sample_b, sample_tilted_a, tilt_a
from src.models.law import InnovationLaw, TiltedALaw
from src.models.records import PathRecord, TiltSchedule

logger = logging.getLogger(__name__)


class _StepSampler:
    """按调度给出每一步 A 的采样方式，倾斜分布只构造一次"""

    def __init__(self, law: InnovationLaw, schedule: TiltSchedule):
        self.law = law
        self.schedule = schedule
        self._tilted: dict[float, TiltedALaw] = {}

    def draw(self, step: int, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray | None]:
        """返回 (A 样本, 对数权重增量)；不倾斜时增量为 None"""
        s = self.schedule.tilt_at(step)
        if s == 0:
            return sample_a(self.law, rng, size), None
        tilted = self._tilted.get(s)
        if tilted is None:
            tilted = self._tilted[s] = tilt_a(self.law, s)
        a = sample_tilted_a(tilted, rng, size)
        # 每个倾斜步: Λ(s) − s·log A
        return a, tilted.log_normalizer - s * np.log(a)


@dataclass
class PathBatch:
    """一批路径的停止状态（tau = 0 表示删失）"""
    tau: np.ndarray
    log_pi_at_stop: np.ndarray
    y_at_stop: np.ndarray
    y_prev: np.ndarray
    m_prev: np.ndarray
    log_weight: np.ndarray
    overflowed: np.ndarray
    n_max: int

    @property
    def size(self) -> int:
        return int(self.tau.size)

    @property
    def censored(self) -> np.ndarray:
        return self.tau == 0

    def record(self, i: int) -> PathRecord:
        tau = int(self.tau[i])
        return PathRecord(
            tau=tau or None,
            n_max=self.n_max,
            log_pi_at_stop=float(self.log_pi_at_stop[i]),
            y_at_stop=float(self.y_at_stop[i]),
            m_prev=float(self.m_prev[i]),
            log_weight=float(self.log_weight[i]),
            overflowed=bool(self.overflowed[i]),
        )


def simulate_paths(law: InnovationLaw, schedule: TiltSchedule, u: float, n_max: int,
                   rng: np.random.Generator, size: int) -> PathBatch:
    """向量化模拟 size 条路径直到首次越过 u 或 n_max 步

    删失路径的状态停在第 n_max 步。Y 溢出为非有限值时按越过处理并标记。
    """
    if u <= 0:
        raise DomainError(f"u 必须为正，收到 {u}")
    if n_max < 1:
        raise DomainError(f"n_max 必须 ≥ 1，收到 {n_max}")

    sampler = _StepSampler(law, schedule)
    log_pi = np.zeros(size)
    y = np.zeros(size)
    y_prev = np.zeros(size)
    m = np.zeros(size)  # M_0 = 0
    m_prev = np.zeros(size)
    logw = np.zeros(size)
    tau = np.zeros(size, dtype=np.int64)
    overflowed = np.zeros(size, dtype=bool)

    alive = np.arange(size)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_max + 1):
            if alive.size == 0:
                break
            b = sample_b(law, rng, alive.size)
            a, dlogw = sampler.draw(step, rng, alive.size)

            y_old = y[alive]
            y_new = y_old + np.exp(log_pi[alive]) * b
            y_prev[alive] = y_old
            m_prev[alive] = m[alive]
            y[alive] = y_new
            log_pi[alive] += np.log(a)
            if dlogw is not None:
                logw[alive] += dlogw

            bad = ~np.isfinite(y_new)
            hit = (y_new > u) | bad
            if bad.any():
                overflowed[alive[bad]] = True
            tau[alive[hit]] = step
            m[alive] = np.maximum(m[alive], np.where(bad, m[alive], y_new))
            alive = alive[~hit]

    n_over = int(overflowed.sum())
    if n_over:
        logger.warning(f"[模拟] {n_over} 条路径 Y 溢出，按越过 u 处理")

    return PathBatch(
        tau=tau,
        log_pi_at_stop=log_pi,
        y_at_stop=y,
        y_prev=y_prev,
        m_prev=m_prev,
        log_weight=logw,
        overflowed=overflowed,
        n_max=n_max,
    )


def run_path(law: InnovationLaw, schedule: TiltSchedule, u: float, n_max: int,
             rng: np.random.Generator) -> PathRecord:
    """模拟单条路径"""
    return simulate_paths(law, schedule, u, n_max, rng, 1).record(0)


@dataclass
class PrefixBatch:
    """定长 L+1 步、不停止的路径片段"""
    y_l: np.ndarray  # Y_L
    m_l: np.ndarray  # M_L = max(0, Y_1..Y_L)
    y_next: np.ndarray  # Y_{L+1}
    log_pi_l: np.ndarray
    log_weight: np.ndarray


def simulate_prefix(law: InnovationLaw, schedule: TiltSchedule, L: int,
                    rng: np.random.Generator, size: int) -> PrefixBatch:
    """模拟 L+1 步，不设停止条件；第 L+1 步的 A 不影响结果，不再采样"""
    sampler = _StepSampler(law, schedule)
    log_pi = np.zeros(size)
    y = np.zeros(size)
    m = np.zeros(size)
    logw = np.zeros(size)
    with np.errstate(over="ignore"):
        for step in range(1, L + 1):
            b = sample_b(law, rng, size)
            a, dlogw = sampler.draw(step, rng, size)
            y = y + np.exp(log_pi) * b
            m = np.maximum(m, y)
            log_pi = log_pi + np.log(a)
            if dlogw is not None:
                logw = logw + dlogw
        y_next = y + np.exp(log_pi) * sample_b(law, rng, size)
    return PrefixBatch(y_l=y, m_l=m, y_next=y_next, log_pi_l=log_pi, log_weight=logw)
