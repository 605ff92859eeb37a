"""首达时间的稀有事件估计器

所有估计器都是加权指示的样本均值，权重来自指数倾斜的似然比；
批次结果以充分统计量 (Σw, Σw², n) 合并。
"""
import logging
import math

import numpy as np
from scipy.special import ndtr

from src.config import get_settings
from src.core.cgf import cramer_root, hypothesis_report, solve_alpha
from src.core.errors import DomainError, MixedTargetError
from src.core.laws import cdf_a, log_mgf_derivs
from src.core.paths import simulate_paths, simulate_prefix
from src.core.runner import WeightSums, collect_until, run_sums
from src.models.law import InnovationLaw
from src.models.records import CltDiagnostics, EstimateRecord, TiltSchedule

logger = logging.getLogger(__name__)

# ⌊·⌋ 的浮点容差: log u/ρ 恰为整数时不被舍到下一格
FLOOR_TOL = 1e-9


def k_and_theta(u: float, rho: float) -> tuple[int, float]:
    """k_u = ⌊log u/ρ⌋ 与 Θ(u) = log u/ρ − k_u"""
    x = math.log(u) / rho
    k = math.floor(x + FLOOR_TOL)
    return k, max(x - k, 0.0)


def _record(sums: WeightSums, metadata: dict, scale: float = 1.0) -> EstimateRecord:
    return EstimateRecord.from_sums(
        sums.sum_w * scale, sums.sum_w2 * scale * scale, sums.n, sums.n_censored, metadata,
    )


def _passage_sums(law: InnovationLaw, schedule: TiltSchedule, u: float, n_max: int, k: int | None):
    """批次函数: k 给定时统计 1{τ = k}，否则统计 1{τ ≤ n_max}"""

    def batch(rng, size):
        paths = simulate_paths(law, schedule, u, n_max, rng, size)
        event = (paths.tau == k) if k is not None else (paths.tau > 0)
        w = np.where(event, np.exp(paths.log_weight), 0.0)
        return WeightSums.of(w, int(paths.censored.sum()))

    return batch


def estimate_pointwise(law: InnovationLaw, rho: float, u: float, samples: int, seed: int,
                       naive: bool = False, threads: int | None = None,
                       batch_size: int | None = None) -> EstimateRecord:
    """P[τ_u = k_u]，k_u = ⌊log u/ρ⌋；默认前 k_u − 1 步以 α = α(ρ) 倾斜

    第 k_u 步的 A 不影响 {τ_u = k_u}，不倾斜；权重为 (k_u−1)Λ(α) − α·log Π_{k_u−1}。
    """
    alpha = solve_alpha(law, rho)
    report = hypothesis_report(law, alpha)
    if not report.h_contractive:
        raise DomainError("E log A ≥ 0，首达概率不是稀有事件")
    if not report.h_index:
        logger.warning(f"[模拟] α={alpha:.4g} 不满足指数条件，单点渐近可能不成立")

    k, theta = k_and_theta(u, rho)
    if k < 1:
        raise DomainError(f"k_u = ⌊log u/ρ⌋ = {k} < 1 (u={u}, rho={rho})")

    schedule = TiltSchedule.untilted() if naive else TiltSchedule.constant(alpha, k - 1)
    logger.info(f"[模拟] 单点估计 k_u={k}, α={alpha:.6g}, 调度={schedule.kind.value}, 路径数={samples}")
    sums = run_sums(_passage_sums(law, schedule, u, k, k), samples, seed, threads, batch_size)
    return _record(sums, {
        "target": "pointwise",
        "k_u": k,
        "theta": theta,
        "alpha": alpha,
        "schedule": schedule.to_dict(),
    })


def pivot_step(law: InnovationLaw, beta: float, u: float, k: int) -> int:
    """两阶段的枢轴步 n = ⌊log u/Λ'(β)⌋，截断到 [1, k−1]"""
    d_beta = log_mgf_derivs(law, beta)[1]
    if d_beta <= 0:
        raise DomainError(f"Λ'(β) = {d_beta:.4g} ≤ 0，第一阶段无法上升到 u")
    return min(k - 1, max(1, math.floor(math.log(u) / d_beta + FLOOR_TOL)))


def _twophase_sums(law: InnovationLaw, beta: float, u: float, n: int, m: int):
    """批次函数: 枢轴 A_n 条件积分后的 P[τ_u = n + m]

    首段前 n−1 步以 β 倾斜，尾段（第 n+1..n+m−1 步）以 1 倾斜，两段独立模拟。
    记 Y_n = Y_{n-1} + Π_{n-1}B_n，尾段从 0 起步的 Y'_j、M'_j，则
        Y_{n+j} = Y_n + Π_{n-1}·A_n·Y'_j，
    {τ_u = n+m} 等价于 M_n ≤ u 且 A_n ∈ (r/Y'_m, r/M'_{m-1}]，r = (u − Y_n)/Π_{n-1}。
    """
    head_schedule = TiltSchedule.constant(beta, n - 1)
    tail_schedule = TiltSchedule.constant(1.0, m - 1)

    def batch(rng, size):
        head = simulate_prefix(law, head_schedule, n - 1, rng, size)
        tail = simulate_prefix(law, tail_schedule, m - 1, rng, size)
        below = np.maximum(head.m_l, head.y_next) <= u
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            room = np.where(below, u - head.y_next, 0.0) / np.exp(head.log_pi_l)
            lo = np.where(tail.y_next > 0, room / tail.y_next, np.inf)
            hi = np.where(tail.m_l > 0, room / tail.m_l, np.inf)
        open_window = below & (hi > lo)
        prob = np.where(open_window, cdf_a(law, hi) - cdf_a(law, np.where(open_window, lo, 0.0)), 0.0)
        w = np.where(prob > 0, prob * np.exp(head.log_weight + tail.log_weight), 0.0)
        return WeightSums.of(w)

    return batch


def estimate_pointwise_twophase(law: InnovationLaw, rho: float, beta: float, u: float, samples: int,
                                seed: int, threads: int | None = None,
                                batch_size: int | None = None) -> EstimateRecord:
    """两阶段倾斜估计 P[τ_u = k_u]

    前 n−1 步以 β 倾斜，使 Π_{n-1} 落在 γu 附近（n = ⌊log u/Λ'(β)⌋，γ ≈ e^{−Λ'(β)}）；
    第 n 步的 A_n 不抽样，按其分布函数对命中区间积分；之后的 k_u − n − 1 步以 1 倾斜，
    此时尾段似然比 1/Π' 与命中区间宽度 ∝ Π' 相消。
    """
    alpha = solve_alpha(law, rho)
    if beta < alpha - 1e-9 * max(1.0, alpha):
        raise DomainError(f"需要 β ≥ α，当前 β={beta}, α={alpha:.6g}（第一阶段将超过 k_u 步）")
    report = hypothesis_report(law, alpha)
    if not report.thm2_regime:
        logger.warning("[模拟] 两阶段倾斜用于反例区之外，估计仍无偏但效率未必更高")

    k, theta = k_and_theta(u, rho)
    if k < 2:
        raise DomainError(f"两阶段估计需要 k_u ≥ 2，当前 k_u={k} (u={u}, rho={rho})")
    n = pivot_step(law, beta, u, k)
    m = k - n
    schedule = TiltSchedule.two_phase(beta, n - 1, 1.0, m - 1)
    logger.info(f"[模拟] 两阶段估计 k_u={k}, β={beta:.6g}, 枢轴步 n={n}, 尾段 {m - 1} 步, 路径数={samples}")
    sums = run_sums(_twophase_sums(law, beta, u, n, m), samples, seed, threads, batch_size)
    return _record(sums, {
        "target": "pointwise",
        "k_u": k,
        "theta": theta,
        "alpha": alpha,
        "beta": beta,
        "pivot_step": n,
        "schedule": schedule.to_dict(),
    })


def ruin_horizon(u: float, rho0: float, horizon_factor: int) -> int:
    """n_max = horizon_factor·⌈log u/ρ₀⌉，至少 horizon_factor 步"""
    steps = math.ceil(math.log(u) / rho0) if u > 1 else 1
    return horizon_factor * max(1, steps)


def estimate_ruin(law: InnovationLaw, u: float, samples: int, horizon_factor: int, seed: int,
                  threads: int | None = None, batch_size: int | None = None) -> EstimateRecord:
    """P[τ_u ≤ n_max]，每一步以 α₀ 倾斜；删失路径的比例单独报告"""
    if horizon_factor < 2:
        raise DomainError(f"horizon_factor 必须 ≥ 2，收到 {horizon_factor}")
    profile = cramer_root(law)
    n_max = ruin_horizon(u, profile.rho0, horizon_factor)
    schedule = TiltSchedule.constant(profile.alpha0, n_max)
    logger.info(f"[模拟] 破产概率 u={u:.6g}, α₀={profile.alpha0:.6g}, n_max={n_max}, 路径数={samples}")
    sums = run_sums(_passage_sums(law, schedule, u, n_max, None), samples, seed, threads, batch_size)
    record = _record(sums, {
        "target": "ruin",
        "alpha": profile.alpha0,
        "n_max": n_max,
        "schedule": schedule.to_dict(),
    })
    if record.censored_weight > 0:
        logger.info(f"[模拟] 删失比例 {record.censored_weight:.3g}（不外推）")
    return record


def _weighted_ks(z: np.ndarray, w: np.ndarray) -> float:
    """加权经验分布与标准正态的 Kolmogorov–Smirnov 距离"""
    order = np.argsort(z, kind="stable")
    z, w = z[order], w[order]
    cdf = np.cumsum(w) / np.sum(w)
    # 相同取值只保留最后一个（跳跃后的值）
    last = np.append(z[1:] != z[:-1], True)
    zs, after = z[last], cdf[last]
    before = np.concatenate(([0.0], after[:-1]))
    phi = ndtr(zs)
    return float(max(np.max(np.abs(after - phi)), np.max(np.abs(before - phi))))


def clt_diagnostics(law: InnovationLaw, u: float, hits: int, seed: int, horizon_factor: int = 4,
                    max_paths: int | None = None, threads: int | None = None,
                    batch_size: int | None = None) -> CltDiagnostics:
    """在 α₀ 倾斜下收集越过 u 的路径，检验 τ_u 的大数律与两种候选尺度的正态近似"""
    profile = cramer_root(law)
    alpha0, rho0, sigma0 = profile.alpha0, profile.rho0, profile.sigma0
    log_u = math.log(u)
    if log_u <= 0:
        raise DomainError(f"需要 u > 1，收到 {u}")
    n_max = ruin_horizon(u, rho0, horizon_factor)
    schedule = TiltSchedule.constant(alpha0, n_max)

    def batch(rng, size):
        paths = simulate_paths(law, schedule, u, n_max, rng, size)
        hit = paths.tau > 0
        return paths.tau[hit].astype(float), np.exp(paths.log_weight[hit]), size

    size = batch_size or get_settings().batch_size
    max_batches = math.ceil((max_paths or 50 * hits) / size)
    parts = collect_until(batch, lambda part: part[0].size, hits, seed, max_batches, threads, size)

    tau = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    n_paths = sum(p[2] for p in parts)
    if tau.size == 0:
        raise DomainError(f"在 {n_paths} 条路径中没有越过 u={u} 的路径")

    center = log_u / rho0
    scale_sigma0 = sigma0 * rho0 ** -1.5
    scale_var0 = math.sqrt(sigma0 - rho0 ** 2) * rho0 ** -1.5
    mean_tau = float(np.sum(w * tau) / np.sum(w))
    diag = CltDiagnostics(
        mean_ratio=mean_tau * rho0 / log_u,
        ks_sigma0=_weighted_ks((tau - center) / (scale_sigma0 * math.sqrt(log_u)), w),
        ks_var0=_weighted_ks((tau - center) / (scale_var0 * math.sqrt(log_u)), w),
        hits=int(tau.size),
        n_paths=int(n_paths),
        scale_sigma0=scale_sigma0,
        scale_var0=scale_var0,
    )
    logger.info(
        f"[模拟] CLT 诊断: mean_ratio={diag.mean_ratio:.4f}, "
        f"KS(σ₀)={diag.ks_sigma0:.4f}, KS(√Λ'')={diag.ks_var0:.4f}"
    )
    return diag


def constant_prefactor(law: InnovationLaw, alpha: float, L: int) -> float:
    """λ(α)^{−(L+1)} · √ρ / (α σ(α) √(2π))，ρ = Λ'(α)，σ(α)² = Λ''(α)

    下标约定: Y_0 = 0，B_1 在第 1 步进入，级数项用到 Y_{L+1}，即 L+1 个 B 与 L 个 A。
    按 Y_1 = B_1 记第一项时，指数比从 Y_0 = B_0 起步的写法多一个 λ(α)^{−1}；
    L = 0 时前因子为 λ(α)^{−1}·√ρ/(ασ√(2π))，而不是 √ρ/(ασ√(2π))。
    """
    lam, rho, var = log_mgf_derivs(law, alpha)
    if rho <= 0 or var <= 0:
        raise DomainError(f"需要 Λ'(α) > 0 且 Λ''(α) > 0 (α={alpha})")
    log_c = -(L + 1) * lam + 0.5 * math.log(rho) - math.log(alpha) - 0.5 * math.log(var) \
        - 0.5 * math.log(2.0 * math.pi)
    return math.exp(log_c)


def estimate_constant_series(law: InnovationLaw, alpha: float, L: int, samples: int, seed: int,
                             eps: float = 0.0, delta: float = 0.0, gamma: float = 0.0,
                             method: str = "tilted", threads: int | None = None,
                             batch_size: int | None = None) -> EstimateRecord:
    """单点渐近常数的级数表示

    E[((Y_{L+1}/(1+γ))^α − max((M_L/(1+ε))^α, (Y_L/(1+δ))^α))_+] 乘以 constant_prefactor。
    method=tilted 时前 L 步以 α 倾斜。
    """
    if L < 0:
        raise DomainError(f"L 必须 ≥ 0，收到 {L}")
    if method not in ("tilted", "naive"):
        raise DomainError(f"未知的 method: {method}")
    if not hypothesis_report(law, alpha).h_index:
        logger.warning(f"[模拟] α={alpha:.4g} 不满足指数条件，常数可能不存在")
    prefactor = constant_prefactor(law, alpha, L)
    schedule = TiltSchedule.constant(alpha, L) if method == "tilted" else TiltSchedule.untilted()

    def batch(rng, size):
        seg = simulate_prefix(law, schedule, L, rng, size)
        top = np.maximum(seg.y_next / (1.0 + gamma), 0.0) ** alpha
        floor = np.maximum(
            (seg.m_l / (1.0 + eps)) ** alpha,
            np.maximum(seg.y_l / (1.0 + delta), 0.0) ** alpha,
        )
        g = np.maximum(top - floor, 0.0)
        w = np.where(g > 0, g * np.exp(seg.log_weight), 0.0)
        return WeightSums.of(w)

    logger.info(f"[模拟] 常数级数 α={alpha:.6g}, L={L}, method={method}, 路径数={samples}")
    sums = run_sums(batch, samples, seed, threads, batch_size)
    return _record(sums, {
        "target": "constant",
        "alpha": alpha,
        "L": L,
        "method": method,
        "eps": eps,
        "delta": delta,
        "gamma": gamma,
    }, scale=prefactor)


def merge(records: list[EstimateRecord]) -> EstimateRecord:
    """合并同一目标、不同随机流的估计"""
    if not records:
        raise ValueError("没有可合并的估计")
    meta = records[0].metadata
    for r in records[1:]:
        if r.metadata != meta:
            raise MixedTargetError(f"估计元数据不一致: {meta} vs {r.metadata}")
    total = WeightSums()
    for r in records:
        total = total + WeightSums(r.sum_w, r.sum_w2, r.n_samples, r.n_censored)
    return _record(total, meta)
