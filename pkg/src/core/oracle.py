"""小规模离散实例的精确枚举

Π 在对数尺度、Y 在线性尺度上枚举全部原子序列，按块深度优先展开以控制内存。
"""
import itertools
import logging
import math

import numpy as np
from scipy.special import gammaln, logsumexp

from src.core.errors import DomainError, GuardError
from src.models.law import ConstB, DiscreteInstance, InnovationLaw, TwoPointA, TwoPointB

logger = logging.getLogger(__name__)

PATH_CAP = 10 ** 8
CHUNK = 1 << 20
TIE_RTOL = 1e-12


def _guard(branching: int, depth: int):
    if depth * math.log(branching) > math.log(PATH_CAP) + 1e-12:
        raise GuardError(f"路径数 {branching}^{depth} 超过上限 {PATH_CAP:.0e}")


def instance_from_law(law: InnovationLaw, n_max: int, u: float) -> DiscreteInstance:
    """从两点 A 与常数/两点 B 构造离散实例"""
    if not isinstance(law.a, TwoPointA):
        raise DomainError("精确枚举需要两点分布的 A")
    if isinstance(law.b, ConstB):
        b_atoms = [(law.b.value, 1.0)]
    elif isinstance(law.b, TwoPointB):
        b_atoms = law.b.atoms()
    else:
        raise DomainError("精确枚举需要常数或两点分布的 B")
    return DiscreteInstance(a_atoms=law.a.atoms(), b_atoms=b_atoms, n_max=n_max, u=u)


class _Enumerator:
    """逐层展开 (log Π, Y, prob)，首次 Y > u 的路径计入 pmf 后不再展开"""

    def __init__(self, inst: DiscreteInstance, depth: int):
        self.u = inst.u
        self.depth = depth
        a = [(v, p) for v, p in inst.a_atoms if p > 0]
        b = [(v, p) for v, p in inst.b_atoms if p > 0]
        # 联合原子: 每一步同时取 (A_k, B_k)
        pairs = list(itertools.product(a, b))
        self.log_a = np.array([math.log(av) for (av, _), _ in pairs])
        self.b = np.array([bv for _, (bv, _) in pairs])
        self.p = np.array([ap * bp for (_, ap), (_, bp) in pairs])
        self.pmf = np.zeros(depth + 1)
        self.censored = 0.0

    def run(self) -> "_Enumerator":
        self._expand(np.zeros(1), np.zeros(1), np.ones(1), 1)
        return self

    def _expand(self, log_pi: np.ndarray, y: np.ndarray, prob: np.ndarray, step: int):
        if step > self.depth:
            self.censored += float(prob.sum())
            return
        width = self.p.size
        per_chunk = max(1, CHUNK // width)
        for start in range(0, log_pi.size, per_chunk):
            lp = log_pi[start:start + per_chunk, None]
            yy = y[start:start + per_chunk, None]
            pp = prob[start:start + per_chunk, None]
            y_new = (yy + np.exp(lp) * self.b).ravel()
            lp_new = (lp + self.log_a).ravel()
            p_new = (pp * self.p).ravel()
            hit = y_new > self.u
            self.pmf[step] += float(p_new[hit].sum())
            keep = ~hit
            if keep.any():
                self._expand(lp_new[keep], y_new[keep], p_new[keep], step + 1)


def exact_tau_pmf(inst: DiscreteInstance) -> tuple[dict[int, float], float]:
    """τ_u 的精确分布 {k: P[τ_u = k]} 与删失质量 P[τ_u > n_max]"""
    _guard(inst.branching, inst.n_max)
    enum = _Enumerator(inst, inst.n_max).run()
    pmf = {k: float(enum.pmf[k]) for k in range(1, inst.n_max + 1)}
    total = sum(pmf.values()) + enum.censored
    if abs(total - 1.0) > 1e-10:
        logger.warning(f"[预言机] 概率守恒偏差 {total - 1.0:.3e}")
    logger.debug(f"[预言机] u={inst.u}, n_max={inst.n_max}, 删失质量={enum.censored:.6g}")
    return pmf, enum.censored


def exact_event_prob(inst: DiscreteInstance, k: int) -> float:
    """P[M_{k−1} ≤ u < Y_k]（严格不等号，Y_k = u 不算越过）"""
    if k < 1:
        raise DomainError(f"k 必须 ≥ 1，收到 {k}")
    _guard(inst.branching, k)
    return float(_Enumerator(inst, k).run().pmf[k])


def exact_walk_tail(a_atoms: list[tuple[float, float]], n: int, t: float) -> float:
    """P[Π_n > t]，按多项式类型类（各原子出现次数）精确求和"""
    atoms = [(v, p) for v, p in a_atoms if p > 0]
    _guard(len(atoms), n)
    if t <= 0:
        return 1.0
    log_a = np.array([math.log(v) for v, _ in atoms])
    log_p = np.array([math.log(p) for _, p in atoms])
    log_t = math.log(t)
    tol = TIE_RTOL * max(1.0, abs(log_t))

    log_terms = []
    for combo in itertools.combinations_with_replacement(range(len(atoms)), n):
        counts = np.bincount(combo, minlength=len(atoms))
        if float(counts @ log_a) > log_t + tol:
            log_terms.append(
                gammaln(n + 1) - float(np.sum(gammaln(counts + 1))) + float(counts @ log_p)
            )
    if not log_terms:
        return 0.0
    return min(1.0, float(np.exp(logsumexp(log_terms))))
