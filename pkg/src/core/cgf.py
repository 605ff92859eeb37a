"""累积量函数 Λ(s) = log E[A^s] 的求根、共轭与前提条件检查"""
import logging
import math

from scipy.optimize import brentq

from src.core.errors import DomainError, NoRootError, RangeError
from src.core.laws import (
    a_marginal, b_positive, cumulant, log_mgf_derivs, sup_log_a, support_extremes,
)
from src.models.law import InnovationLaw, LogNormalA, TwoPointA, UniformA
from src.models.records import CumulantProfile, HypothesisReport

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-10
MAX_ITER = 200
S_CAP = 2.0 ** 10
MOMENT_EPS = 0.5


def _brent(f, lo: float, hi: float) -> float:
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=MAX_ITER)


def _polish(s: float, residual: float, slope: float, lo: float, hi: float) -> float:
    """一步牛顿修正，越出括号区间则放弃"""
    if slope > 0:
        cand = s - residual / slope
        if lo <= cand <= hi:
            return cand
    return s


def _bracket_up(f, start: float) -> float:
    """从 start 开始加倍直到 f > 0，超过 S_CAP 返回 -1"""
    hi = max(start, 1.0)
    while f(hi) <= 0:
        hi *= 2.0
        if hi > S_CAP:
            return -1.0
    return hi


def _solve_derivative(law, target: float) -> float:
    """在 s ≥ 0 上求 Λ'(s) = target（调用方保证 target > Λ'(0)）"""
    law = a_marginal(law)

    def f(s):
        return log_mgf_derivs(law, s)[1] - target

    hi = _bracket_up(f, 1.0)
    if hi < 0:
        raise RangeError(f"Λ'(s) = {target} 在 s ≤ {S_CAP:g} 内无解")
    s = _brent(f, 0.0, hi)
    _, d1, d2 = log_mgf_derivs(law, s)
    return _polish(s, d1 - target, d2, 0.0, hi)


def _check_rho_range(law, rho: float):
    e_log_a = log_mgf_derivs(law, 0.0)[1]
    if not rho > e_log_a:
        raise RangeError(f"rho={rho} 不大于 E log A = {e_log_a:.6g}")
    upper = sup_log_a(law)
    if not rho < upper:
        raise RangeError(f"rho={rho} 不小于 sup Λ' = log(ess sup A) = {upper:.6g}")


def solve_alpha(law, rho: float) -> float:
    """Λ'(α) = rho 的唯一解 α ≥ 0"""
    law = a_marginal(law)
    _check_rho_range(law, rho)
    alpha = _solve_derivative(law, rho)
    resid = abs(log_mgf_derivs(law, alpha)[1] - rho)
    if resid > ROOT_TOL * max(1.0, abs(rho)):
        logger.warning(f"[求根] solve_alpha 残差偏大: rho={rho}, |Λ'(α)-rho|={resid:.3e}")
    return alpha


def alpha_bar(law, alpha: float) -> float:
    """ᾱ = α − Λ(α)/Λ'(α)：Λ 在 α 处切线与横轴交点"""
    lam, d1, _ = log_mgf_derivs(law, alpha)
    if d1 <= 0:
        raise DomainError(f"Λ'({alpha}) = {d1:.6g} ≤ 0，切线不会在右侧穿过横轴")
    return alpha - lam / d1


def legendre(law, x: float) -> float:
    """Λ*(x) = sup_{s≥0} {sx − Λ(s)}"""
    law = a_marginal(law)
    if x <= log_mgf_derivs(law, 0.0)[1]:
        return 0.0
    upper = sup_log_a(law)
    if x > upper:
        raise RangeError(f"x={x} 超过 sup Λ' = {upper:.6g}")
    if x == upper:
        # 有界支撑端点: 原子分布取 −log P[A = a_hi]，连续分布为 +∞
        if isinstance(law, TwoPointA):
            return -math.log(law.atoms()[-1][1])
        return math.inf
    s = _solve_derivative(law, x)
    return s * x - cumulant(law, s)


def find_alpha_min(law) -> float:
    """Λ 的最小值点；Λ'(0) ≥ 0 时为 0，A ≤ 1 a.s. 时为 +∞"""
    law = a_marginal(law)
    if log_mgf_derivs(law, 0.0)[1] >= 0:
        return 0.0
    if sup_log_a(law) <= 0:
        return math.inf
    return _solve_derivative(law, 0.0)


def cramer_root(law, strict: bool = True) -> CumulantProfile:
    """求 Cramér 根 α₀ (Λ(α₀) = 0) 及 ρ₀ = Λ'(α₀), σ₀ = λ''(α₀)

    strict=False 时找不到根返回 alpha0=None 的 profile，而不是抛 NoRootError。
    """
    law = a_marginal(law)
    e_log_a = log_mgf_derivs(law, 0.0)[1]
    alpha_min = find_alpha_min(law)

    def missing(reason: str) -> CumulantProfile:
        if strict:
            raise NoRootError(reason)
        logger.info(f"[累积量] {reason}")
        return CumulantProfile(
            alpha_min=alpha_min, e_log_a=e_log_a, alpha0=None, rho0=None, sigma0=None,
            tolerance=ROOT_TOL,
        )

    if e_log_a >= 0:
        return missing(f"E log A = {e_log_a:.6g} ≥ 0，不存在正的 Cramér 根")
    if math.isinf(alpha_min):
        return missing("A ≤ 1 a.s.，Λ 单调递减，不存在 Cramér 根")

    def lam(s):
        return cumulant(law, s)

    hi = _bracket_up(lam, 2.0 * alpha_min)
    if hi < 0:
        return missing(f"Λ 在 [0, {S_CAP:g}] 上恒为负")

    alpha0 = _brent(lam, alpha_min, hi)
    value, d1, d2 = log_mgf_derivs(law, alpha0)
    alpha0 = _polish(alpha0, value, d1, alpha_min, hi)
    value, d1, d2 = log_mgf_derivs(law, alpha0)

    # λ'' = (Λ'' + Λ'²) e^Λ
    sigma0 = (d2 + d1 * d1) * math.exp(value)
    return CumulantProfile(
        alpha_min=alpha_min,
        e_log_a=e_log_a,
        alpha0=alpha0,
        rho0=d1,
        sigma0=sigma0,
        tolerance=ROOT_TOL,
    )


def rate_I(law, rho: float) -> float:
    """I(ρ) = Λ*(ρ)/ρ = ᾱ(α(ρ))"""
    return alpha_bar(law, solve_alpha(law, rho))


# ---------- 前提条件 ----------

def _support_condition(law: InnovationLaw) -> bool | None:
    """存在 a₁<1<a₂ 与 b₁, b₂ 使 b₂/(1−a₂) < b₁/(1−a₁)；只用支撑端点判断

    B 有正质量时左边可取负、右边取正，条件成立；B ≤ 0 时两侧符号相反，不成立。
    B 的上端恰为 0 且 A 的支撑连续穿过 1 时极限为 0/0，返回 None（无法判定）。
    """
    ext = support_extremes(law)
    if not (ext.has_a_below_1 and ext.has_a_above_1):
        return False
    if ext.b_hi > 0:
        return True
    if ext.b_hi == 0 and ext.a_continuous:
        return None
    return False


def _density_floor(law: InnovationLaw) -> bool:
    """A 的密度在 (1, ∞) 的某个区间上有正下界"""
    a = law.a
    if isinstance(a, LogNormalA):
        return True
    if isinstance(a, UniformA):
        return a.hi > 1.0
    return False


def hypothesis_report(law: InnovationLaw, alpha: float) -> HypothesisReport:
    """逐条检查两个定理的前提（报告，不拦截）"""
    e_log_a = log_mgf_derivs(law, 0.0)[1]
    alpha_min = find_alpha_min(law)
    lam_1 = cumulant(law, 1.0)
    lam_alpha = cumulant(law, alpha)

    h_index = alpha_min <= 1.0 or lam_1 < lam_alpha
    thm2 = (
        alpha_min > 1.0
        and lam_alpha < lam_1
        and b_positive(law)
        and _density_floor(law)
    )
    return HypothesisReport(
        h_contractive=e_log_a < 0,
        # 所有允许的分布族对任意有限阶矩都有限
        h_moments=True,
        moment_eps=MOMENT_EPS,
        h_index=h_index,
        h_support=_support_condition(law),
        h_density=not law.is_lattice,
        thm2_regime=thm2,
        alpha_used=float(alpha),
    )


# ---------- 两阶段构造相关 ----------

def regime_boundary(law) -> tuple[float, float] | None:
    """α_min > 1 时 α̃ > α_min 满足 Λ(α̃) = Λ(1)，返回 (α̃, Λ'(α̃))

    rho > Λ'(α̃) 时单点渐近成立；rho < Λ'(α̃) 落入 u^δ 反例区。
    """
    law = a_marginal(law)
    alpha_min = find_alpha_min(law)
    if not 1.0 < alpha_min < math.inf:
        return None
    lam_1 = cumulant(law, 1.0)

    def f(s):
        return cumulant(law, s) - lam_1

    hi = _bracket_up(f, 2.0 * alpha_min)
    if hi < 0:
        return None
    alpha_tilde = _brent(f, alpha_min, hi)
    return alpha_tilde, log_mgf_derivs(law, alpha_tilde)[1]


def _eta(law, alpha: float) -> float:
    """η = (Λ(1) − Λ(α)) / Λ'(α)"""
    lam_alpha, d1, _ = log_mgf_derivs(law, alpha)
    if d1 <= 0:
        raise DomainError(f"Λ'({alpha}) ≤ 0")
    return (cumulant(law, 1.0) - lam_alpha) / d1


def default_beta(law, alpha: float) -> float:
    """第一阶段倾斜 β = α + η/2，满足 β − α < η"""
    eta = _eta(law, alpha)
    if eta <= 0:
        raise DomainError(f"Λ(α) ≥ Λ(1)，两阶段构造不适用 (η={eta:.6g})")
    return alpha + eta / 2.0


def predicted_delta(law, alpha: float, beta: float) -> float:
    """u^δ 超额的下界 δ = (η − (β−α))·q，q = 1 − Λ'(α)/Λ'(β)"""
    eta = _eta(law, alpha)
    d_alpha = log_mgf_derivs(law, alpha)[1]
    d_beta = log_mgf_derivs(law, beta)[1]
    q = 1.0 - d_alpha / d_beta
    return (eta - (beta - alpha)) * q
