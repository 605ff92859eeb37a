"""u 网格上的渐近验证: 单点渐近常数、u^δ 超额增长、Kesten–Goldie 尾常数"""
import logging
import math

import numpy as np

from src.core.cgf import (
    alpha_bar, cramer_root, default_beta, hypothesis_report, predicted_delta, solve_alpha,
)
from src.core.engine import (
    estimate_pointwise, estimate_pointwise_twophase, estimate_ruin, k_and_theta,
)
from src.core.errors import DomainError
from src.core.laws import b_positive, cumulant
from src.experiments.base import BaseExperiment, GridContext
from src.experiments.fitting import extrapolate_constant
from src.models.law import InnovationLaw
from src.models.records import EstimateRecord, GridReport, GridRow

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 6


def normalize_pointwise(p_hat: float, u: float, law, alpha: float, rho: float) -> float:
    """ĉ = p̂ · √(log u) · u^ᾱ · λ(α)^Θ(u)，在对数尺度上计算"""
    if p_hat <= 0:
        return 0.0
    log_u = math.log(u)
    _, theta = k_and_theta(u, rho)
    log_c = (
        math.log(p_hat)
        + 0.5 * math.log(log_u)
        + alpha_bar(law, alpha) * log_u
        + theta * cumulant(law, alpha)
    )
    return math.exp(log_c)


def check_grid(u_grid: list[float]):
    """网格至少 6 点且等比"""
    if len(u_grid) < MIN_GRID_POINTS:
        raise DomainError(f"网格至少需要 {MIN_GRID_POINTS} 个点，收到 {len(u_grid)}")
    ratios = np.diff(np.log(u_grid))
    if np.any(ratios <= 0) or np.ptp(ratios) > 1e-6 * max(1.0, float(np.max(np.abs(ratios)))):
        raise DomainError("u 网格必须严格递增且等比")


def _row(u: float, k: int, theta: float, est: EstimateRecord, c_hat: float) -> GridRow:
    return GridRow(
        u=u, k_u=k, theta=theta, p_hat=est.value, stderr=est.stderr, ess=est.ess, c_hat=c_hat,
    )


class PointwiseExperiment(BaseExperiment):
    """P[τ_u = k_u] 归一化后应与 u 无关"""

    name = "thm1"
    display_name = "单点首达渐近"
    description = "单一倾斜估计 P[τ_u = ⌊log u/ρ⌋]，检验归一化常数 ĉ(u) 的平稳性"
    regime_tag = "thm1"
    extrapolate = True

    def prepare(self, context: GridContext):
        context.extra["alpha"] = solve_alpha(context.law, context.rho)
        context.extra["alpha_bar"] = alpha_bar(context.law, context.extra["alpha"])

    def estimate(self, context: GridContext, index: int, u: float) -> EstimateRecord:
        return estimate_pointwise(
            context.law, context.rho, u, context.samples, context.point_seed(index),
            naive=context.method == "naive", threads=context.threads, batch_size=context.batch_size,
        )

    def estimate_point(self, context: GridContext, index: int, u: float) -> GridRow:
        est = self.estimate(context, index, u)
        alpha = context.extra["alpha"]
        k, theta = k_and_theta(u, context.rho)
        return _row(u, k, theta, est, normalize_pointwise(est.value, u, context.law, alpha, context.rho))

    def analyze(self, context: GridContext, rows: list[GridRow]) -> GridReport:
        report = super().analyze(context, rows)
        if not self.extrapolate:
            return report
        c_limit, c_limit_se = extrapolate_constant(report.rows)
        context.extra["c_limit"] = c_limit
        if math.isfinite(c_limit):
            logger.info(f"[网格] ĉ 按 1/log u 外推: c∞={c_limit:.4g} ± {c_limit_se:.2g}")
        return report


class TwoPhaseExperiment(PointwiseExperiment):
    """反例区: 同样的归一化下 ĉ(u) 以 u^δ 增长"""

    name = "thm2"
    display_name = "两阶段超额增长"
    description = "两阶段倾斜估计 P[τ_u = ⌊log u/ρ⌋]，拟合 ĉ(u) 的增长指数 δ"
    regime_tag = "thm2"
    extrapolate = False

    def prepare(self, context: GridContext):
        super().prepare(context)
        alpha = context.extra["alpha"]
        if not hypothesis_report(context.law, alpha).thm2_regime:
            logger.warning(f"[网格] α={alpha:.4g} 不在反例区，ĉ(u) 未必增长")
        beta = context.beta if context.beta is not None else default_beta(context.law, alpha)
        context.extra["beta"] = beta
        try:
            delta = predicted_delta(context.law, alpha, beta)
            context.extra["predicted_delta"] = delta
            logger.info(f"[网格] β={beta:.6g}，理论增长指数下界 δ={delta:.4g}")
        except DomainError as e:
            logger.warning(f"[网格] 无法给出 δ 下界: {e}")

    def estimate(self, context: GridContext, index: int, u: float) -> EstimateRecord:
        if context.method != "twophase":
            return super().estimate(context, index, u)
        return estimate_pointwise_twophase(
            context.law, context.rho, context.extra["beta"], u, context.samples, context.point_seed(index),
            threads=context.threads, batch_size=context.batch_size,
        )


class KestenGoldieExperiment(BaseExperiment):
    """ĉ₀(u) = P[τ_u < ∞] · u^{α₀} 应趋于常数"""

    name = "kg"
    display_name = "Kesten–Goldie 尾常数"
    description = "α₀ 倾斜估计破产概率，检验 u^{α₀} 归一化后的平稳性"
    regime_tag = "kg"

    def prepare(self, context: GridContext):
        profile = cramer_root(context.law)
        context.extra["alpha0"] = profile.alpha0
        context.extra["rho0"] = profile.rho0
        if not b_positive(context.law):
            logger.info("[网格] B 不恒正，只报告 P[τ_u < ∞] 版本（不等同于 P[Y > u]）")

    def estimate_point(self, context: GridContext, index: int, u: float) -> GridRow:
        est = estimate_ruin(
            context.law, u, context.samples, context.horizon_factor, context.point_seed(index),
            threads=context.threads, batch_size=context.batch_size,
        )
        alpha0 = context.extra["alpha0"]
        k, theta = k_and_theta(u, context.extra["rho0"])
        c_hat = est.value * u ** alpha0 if est.value > 0 else 0.0
        return _row(u, k, theta, est, c_hat)


EXPERIMENT_REGISTRY: dict[str, type[BaseExperiment]] = {
    "thm1": PointwiseExperiment,
    "thm2": TwoPhaseExperiment,
    "kg": KestenGoldieExperiment,
}


def run_grid(law: InnovationLaw, rho: float, u_grid: list[float], samples_per_point: int, method: str,
             seed: int, beta: float | None = None, regime: str | None = None,
             threads: int | None = None, batch_size: int | None = None) -> GridReport:
    """各网格点并行运行单点估计并拟合；method=twophase 默认归入 thm2"""
    if method not in ("tilted", "twophase", "naive"):
        raise DomainError(f"未知的 method: {method}")
    check_grid(u_grid)
    regime = regime or ("thm2" if method == "twophase" else "thm1")
    experiment = EXPERIMENT_REGISTRY[regime]()
    context = GridContext(
        law=law, u_grid=list(u_grid), samples=samples_per_point, seed=seed, rho=rho, beta=beta,
        method=method, threads=threads, batch_size=batch_size,
    )
    return experiment.run(context)


def kesten_goldie_grid(law: InnovationLaw, u_grid: list[float], samples: int, seed: int,
                       horizon_factor: int = 4, threads: int | None = None,
                       batch_size: int | None = None) -> GridReport:
    check_grid(u_grid)
    context = GridContext(
        law=law, u_grid=list(u_grid), samples=samples, seed=seed, horizon_factor=horizon_factor,
        threads=threads, batch_size=batch_size,
    )
    return KestenGoldieExperiment().run(context)
