"""乘性随机游走 Π_n = A₁⋯A_n 的大偏差近似与校验工具"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from src.core.cgf import solve_alpha
from src.core.errors import DomainError, LatticeLawError, RangeError
from src.core.laws import a_marginal, log_mgf_derivs, sample_a, sample_tilted_a, sup_log_a, tilt_a
from src.core.runner import WeightSums, run_sums
from src.models.law import TwoPointA
from src.models.records import EstimateRecord

logger = logging.getLogger(__name__)

# c 落在 [E log A, sup Λ'] 末端 5% 以内时给出提示
NEAR_UPPER_FRACTION = 0.05


@dataclass(frozen=True)
class PetrovQuery:
    """P[Π_n > e^{n(c+γ_n)}] 的查询；alpha 省略时由 Λ'(α) = c 求出"""
    n: int
    c: float
    gamma_n: float = 0.0
    alpha: float | None = None


def _prepare(law, c: float, alpha: float | None) -> tuple[float, float, float]:
    """校验查询并返回 (α, Λ(α), Λ''(α))"""
    a_law = a_marginal(law)
    if isinstance(a_law, TwoPointA):
        raise LatticeLawError("两点分布的 log A 是格点分布，不适用 Petrov 近似")
    e_log_a = log_mgf_derivs(a_law, 0.0)[1]
    if c <= e_log_a:
        raise RangeError(f"c={c} 不大于 E log A = {e_log_a:.6g}")

    upper = sup_log_a(a_law)
    if math.isfinite(upper) and c > upper - NEAR_UPPER_FRACTION * (upper - e_log_a):
        logger.warning(f"[游走] c={c} 接近 sup Λ' = {upper:.6g}，近似精度下降")

    if alpha is None:
        alpha = solve_alpha(a_law, c)
    lam, d1, d2 = log_mgf_derivs(a_law, alpha)
    if abs(d1 - c) > 1e-8 * max(1.0, abs(c)):
        raise DomainError(f"Λ'({alpha}) = {d1:.12g} 与 c={c} 不一致")
    if d2 <= 0:
        raise DomainError(f"Λ''({alpha}) = {d2} ≤ 0")
    return alpha, lam, d2


def _prefactor(alpha: float, sig2: float, n: int) -> float:
    """1 / (α σ(α) √(2πn))"""
    return 1.0 / (alpha * math.sqrt(sig2) * math.sqrt(2.0 * math.pi * n))


def petrov_prob(law, q: PetrovQuery) -> float:
    """P[Π_n > e^{n(c+γ)}] ≈ exp{−n(α(c+γ) − Λ(α) + γ²/(2σ²))} / (ασ√(2πn))"""
    alpha, lam, sig2 = _prepare(law, q.c, q.alpha)
    n, c, gamma = q.n, q.c, q.gamma_n
    exponent = n * (alpha * (c + gamma) - lam + gamma ** 2 / (2.0 * sig2))
    return _prefactor(alpha, sig2, n) * math.exp(-exponent)


def petrov_shifted(law, n: int, j_n: int, delta_n: float, alpha: float,
                   envelope: float | None = None) -> float:
    """P[Π_{n−j} ≥ t·e^{nδ}] ≈ t^{−ᾱ} e^{−αnδ} e^{−jΛ(α)} / (ασ√(2πn))，t = e^{nΛ'(α)}"""
    if envelope is not None:
        spread = max(math.sqrt(n) * abs(delta_n), j_n / math.sqrt(n))
        if spread > envelope:
            raise DomainError(f"max(√n|δ|, j/√n) = {spread:.4g} 超过包络 {envelope}")
    c = log_mgf_derivs(a_marginal(law), alpha)[1]
    alpha, lam, sig2 = _prepare(law, c, alpha)
    exponent = n * (alpha * c - lam) + alpha * n * delta_n + j_n * lam
    return _prefactor(alpha, sig2, n) * math.exp(-exponent)


def exact_gaussian_walk_tail(mu: float, sigma: float, n: int, threshold: float) -> float:
    """log A ~ N(mu, σ²) 时 P[Π_n > threshold] = Q((log threshold − n·mu)/(σ√n))"""
    if threshold <= 0:
        raise DomainError(f"threshold 必须为正，收到 {threshold}")
    z = (math.log(threshold) - n * mu) / (sigma * math.sqrt(n))
    return float(ndtr(-z))


def mc_walk_tail(law, n: int, t: float, samples: int, tilt_alpha: float, seed: int,
                 threads: int | None = None, batch_size: int | None = None) -> EstimateRecord:
    """P[Π_n > t] 的重要性抽样估计：每一步以 tilt_alpha 倾斜，权重 exp(nΛ(α) − α log Π_n)"""
    if t <= 0:
        raise DomainError(f"t 必须为正，收到 {t}")
    a_law = a_marginal(law)
    log_t = math.log(t)
    tilted = tilt_a(a_law, tilt_alpha) if tilt_alpha > 0 else None

    def batch(rng, size):
        log_pi = np.zeros(size)
        for _ in range(n):
            a = sample_tilted_a(tilted, rng, size) if tilted else sample_a(a_law, rng, size)
            log_pi += np.log(a)
        if tilted:
            logw = n * tilted.log_normalizer - tilted.s * log_pi
            w = np.where(log_pi > log_t, np.exp(logw), 0.0)
        else:
            w = (log_pi > log_t).astype(float)
        return WeightSums.of(w)

    logger.info(f"[游走] MC 估计 n={n}, log t={log_t:.4g}, 倾斜={tilt_alpha:.4g}, 路径数={samples}")
    sums = run_sums(batch, samples, seed, threads, batch_size)
    return EstimateRecord.from_sums(sums.sum_w, sums.sum_w2, sums.n, 0, {
        "target": "walk_tail",
        "n": n,
        "log_t": log_t,
        "alpha": tilt_alpha,
    })
