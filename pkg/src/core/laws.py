"""创新分布的采样、矩母函数与指数倾斜

所有函数都是纯函数，随机数由调用方显式传入 np.random.Generator。
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from src.core.errors import DomainError
from src.models.law import (
    ConstB, ExponentialB, InnovationLaw, LogNormalA, TiltedALaw, TwoPointA, TwoPointB,
    UniformA, UniformB,
)

logger = logging.getLogger(__name__)


def a_marginal(law) -> LogNormalA | UniformA | TwoPointA:
    """接受 InnovationLaw 或 A 的边际分布"""
    return law.a if isinstance(law, InnovationLaw) else law


def _check_s(s: float):
    if s < 0 or math.isnan(s):
        raise DomainError(f"矩母函数只在 s ≥ 0 上定义，收到 s={s}")


def _as_output(values: np.ndarray, size):
    return float(values) if size is None else values


# ---------- 采样 ----------

def sample_a(law, rng: np.random.Generator, size=None):
    """从 A 的分布采样（size=None 返回标量）"""
    law = a_marginal(law)
    if isinstance(law, LogNormalA):
        return _as_output(np.exp(rng.normal(law.mu, law.sigma, size)), size)
    if isinstance(law, UniformA):
        return _as_output(law.lo + (law.hi - law.lo) * rng.random(size), size)
    if isinstance(law, TwoPointA):
        return _as_output(np.where(rng.random(size) < law.p1, law.a1, law.a2), size)
    raise TypeError(f"未知的 A 分布: {law!r}")


def sample_b(law, rng: np.random.Generator, size=None):
    """从 B 的分布采样（size=None 返回标量）"""
    law = law.b if isinstance(law, InnovationLaw) else law
    if isinstance(law, ConstB):
        return law.value if size is None else np.full(size, law.value, dtype=float)
    if isinstance(law, UniformB):
        return _as_output(rng.uniform(law.lo, law.hi, size), size)
    if isinstance(law, ExponentialB):
        return _as_output(rng.exponential(1.0 / law.rate, size), size)
    if isinstance(law, TwoPointB):
        return _as_output(np.where(rng.random(size) < law.p1, law.b1, law.b2), size)
    raise TypeError(f"未知的 B 分布: {law!r}")


def cdf_a(law, x) -> np.ndarray:
    """P[A ≤ x]，逐元素；x 可以取 0 或 ∞"""
    law = a_marginal(law)
    x = np.asarray(x, dtype=float)
    if isinstance(law, LogNormalA):
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(x, 0.0)) - law.mu) / law.sigma
        return ndtr(z)
    if isinstance(law, UniformA):
        return np.clip((x - law.lo) / (law.hi - law.lo), 0.0, 1.0)
    if isinstance(law, TwoPointA):
        return np.where(x >= law.a1, law.p1, 0.0) + np.where(x >= law.a2, 1.0 - law.p1, 0.0)
    raise TypeError(f"未知的 A 分布: {law!r}")


# ---------- 矩母函数 λ(s) = E[A^s] 及其对数导数 ----------

def _uniform_log_moments(law: UniformA, s: float) -> tuple[float, float, float]:
    """Uniform[lo, hi] 的 (Λ, Λ', Λ'')，原函数以 hi^{s+1} 归一避免溢出"""
    t = s + 1.0
    lo, hi = law.lo, law.hi
    l_lo, l_hi = math.log(lo), math.log(hi)
    r = math.exp(t * (l_lo - l_hi))  # (lo/hi)^t ∈ (0,1)

    # ∫ a^s (log a)^k da 的原函数除以 hi^t
    f0 = (1.0 - r) / t
    f1 = (l_hi / t - 1.0 / t ** 2) - r * (l_lo / t - 1.0 / t ** 2)
    f2 = (l_hi ** 2 / t - 2.0 * l_hi / t ** 2 + 2.0 / t ** 3) \
        - r * (l_lo ** 2 / t - 2.0 * l_lo / t ** 2 + 2.0 / t ** 3)

    lam = t * l_hi + math.log1p(-r) - math.log(t) - math.log(hi - lo)
    d1 = f1 / f0
    d2 = f2 / f0 - d1 ** 2
    return lam, d1, d2


def mgf_a(law, s: float) -> float:
    """λ(s) = E[A^s]"""
    law = a_marginal(law)
    _check_s(s)
    if isinstance(law, LogNormalA):
        return math.exp(law.mu * s + law.sigma ** 2 * s ** 2 / 2.0)
    if isinstance(law, UniformA):
        t = s + 1.0
        return (law.hi ** t - law.lo ** t) / (t * (law.hi - law.lo))
    if isinstance(law, TwoPointA):
        return law.p1 * law.a1 ** s + (1.0 - law.p1) * law.a2 ** s
    raise TypeError(f"未知的 A 分布: {law!r}")


def log_mgf_derivs(law, s: float) -> tuple[float, float, float]:
    """(Λ(s), Λ'(s), Λ''(s))，全部为解析式"""
    law = a_marginal(law)
    _check_s(s)
    if isinstance(law, LogNormalA):
        v = law.sigma ** 2
        return law.mu * s + v * s ** 2 / 2.0, law.mu + v * s, v
    if isinstance(law, UniformA):
        return _uniform_log_moments(law, s)
    if isinstance(law, TwoPointA):
        atoms = law.atoms()
        logs = np.array([math.log(a) for a, _ in atoms])
        lw = np.array([math.log(p) for _, p in atoms]) + s * logs
        lam = float(logsumexp(lw))
        w = np.exp(lw - lam)
        d1 = float(np.dot(w, logs))
        d2 = max(float(np.dot(w, logs ** 2)) - d1 ** 2, 0.0)
        return lam, d1, d2
    raise TypeError(f"未知的 A 分布: {law!r}")


def cumulant(law, s: float) -> float:
    """Λ(s) = log λ(s)"""
    return log_mgf_derivs(law, s)[0]


# ---------- 指数倾斜 ----------

def tilt_a(law, s: float) -> TiltedALaw:
    """倾斜测度 a^s μ(da) / λ(s)"""
    law = a_marginal(law)
    _check_s(s)
    log_norm = cumulant(law, s)
    if s == 0:
        return TiltedALaw(base=law, s=0.0, log_normalizer=0.0, closed_form=law)

    if isinstance(law, LogNormalA):
        closed = LogNormalA(mu=law.mu + s * law.sigma ** 2, sigma=law.sigma)
    elif isinstance(law, TwoPointA):
        w1 = law.p1 * law.a1 ** s
        w2 = (1.0 - law.p1) * law.a2 ** s
        closed = TwoPointA(a1=law.a1, p1=w1 / (w1 + w2), a2=law.a2)
    else:
        closed = None
    return TiltedALaw(base=law, s=float(s), log_normalizer=log_norm, closed_form=closed)


def sample_tilted_a(tilted: TiltedALaw, rng: np.random.Generator, size=None):
    """从倾斜后的 A 采样；Uniform 走闭式逆 CDF F(a) = (a^{s+1} - lo^{s+1}) / (hi^{s+1} - lo^{s+1})"""
    if tilted.closed_form is not None:
        return sample_a(tilted.closed_form, rng, size)
    law = tilted.base
    t = tilted.s + 1.0
    r = (law.lo / law.hi) ** t
    v = rng.random(size)
    return _as_output(law.hi * (r + v * (1.0 - r)) ** (1.0 / t), size)


# ---------- 支撑集 ----------

@dataclass(frozen=True)
class SupportExtremes:
    """两个边际分布的本质支撑上下界"""
    a_lo: float
    a_hi: float
    b_lo: float
    b_hi: float
    has_a_below_1: bool
    has_a_above_1: bool
    a_continuous: bool  # A 的支撑是否为连续区间（可任意接近 1）


def support_extremes(law: InnovationLaw) -> SupportExtremes:
    a, b = law.a, law.b
    if isinstance(a, LogNormalA):
        a_lo, a_hi, continuous = 0.0, math.inf, True
    elif isinstance(a, UniformA):
        a_lo, a_hi, continuous = a.lo, a.hi, True
    else:
        values = [v for v, _ in a.atoms()]
        a_lo, a_hi, continuous = min(values), max(values), False

    if isinstance(b, ConstB):
        b_lo = b_hi = b.value
    elif isinstance(b, UniformB):
        b_lo, b_hi = b.lo, b.hi
    elif isinstance(b, ExponentialB):
        b_lo, b_hi = 0.0, math.inf
    else:
        values = [v for v, _ in b.atoms()]
        b_lo, b_hi = min(values), max(values)

    return SupportExtremes(
        a_lo=a_lo,
        a_hi=a_hi,
        b_lo=b_lo,
        b_hi=b_hi,
        has_a_below_1=a_lo < 1.0,
        has_a_above_1=a_hi > 1.0,
        a_continuous=continuous,
    )


def b_positive(law: InnovationLaw) -> bool:
    """B > 0 a.s.（指数分布支撑 (0, ∞) 也算）"""
    if isinstance(law.b, ExponentialB):
        return True
    return support_extremes(law).b_lo > 0


def sup_log_a(law) -> float:
    """Λ' 的上确界 = log(ess sup A)"""
    law = a_marginal(law)
    if isinstance(law, LogNormalA):
        return math.inf
    if isinstance(law, UniformA):
        return math.log(law.hi)
    return math.log(max(v for v, _ in law.atoms()))
