"""模拟与分析结果的数据模型"""
import math
from dataclasses import asdict, dataclass, field
from enum import Enum


class ScheduleKind(str, Enum):
    """倾斜调度类型"""
    UNTILTED = "untilted"
    CONSTANT = "constant"
    TWO_PHASE = "twophase"


@dataclass(frozen=True)
class TiltSchedule:
    """每一步 A 的采样倾斜参数

    constant: 第 1..n1 步以 s1 倾斜；twophase: 第 1..n1 步 s1，第 n1+1..n1+n2 步 s2；
    超出部分一律不倾斜。两阶段估计器记录的 twophase 调度中，两段之间还隔着一个
    按分布函数积分、不抽样的枢轴步（见 metadata 的 pivot_step）。
    """
    kind: ScheduleKind = ScheduleKind.UNTILTED
    s1: float = 0.0
    n1: int = 0
    s2: float = 0.0
    n2: int = 0

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError(f"调度步数不能为负: n1={self.n1}, n2={self.n2}")
        if self.s1 < 0 or self.s2 < 0:
            raise ValueError(f"倾斜参数不能为负: s1={self.s1}, s2={self.s2}")

    @classmethod
    def untilted(cls) -> "TiltSchedule":
        return cls()

    @classmethod
    def constant(cls, s: float, horizon: int) -> "TiltSchedule":
        return cls(kind=ScheduleKind.CONSTANT, s1=float(s), n1=int(horizon))

    @classmethod
    def two_phase(cls, s1: float, n1: int, s2: float, n2: int) -> "TiltSchedule":
        return cls(kind=ScheduleKind.TWO_PHASE, s1=float(s1), n1=int(n1), s2=float(s2), n2=int(n2))

    def tilt_at(self, step: int) -> float:
        """第 step 步（从 1 开始）的倾斜参数"""
        if self.kind == ScheduleKind.UNTILTED:
            return 0.0
        if step <= self.n1:
            return self.s1
        if self.kind == ScheduleKind.TWO_PHASE and step <= self.n1 + self.n2:
            return self.s2
        return 0.0

    @property
    def is_tilted(self) -> bool:
        return self.kind != ScheduleKind.UNTILTED and (
            (self.s1 > 0 and self.n1 > 0) or (self.s2 > 0 and self.n2 > 0)
        )

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value}
        if self.kind != ScheduleKind.UNTILTED:
            data.update(s1=self.s1, n1=self.n1)
        if self.kind == ScheduleKind.TWO_PHASE:
            data.update(s2=self.s2, n2=self.n2)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TiltSchedule":
        return cls(
            kind=ScheduleKind(data.get("kind", "untilted")),
            s1=float(data.get("s1", 0.0)),
            n1=int(data.get("n1", 0)),
            s2=float(data.get("s2", 0.0)),
            n2=int(data.get("n2", 0)),
        )


@dataclass
class PathRecord:
    """单条轨迹的停止状态"""
    tau: int | None  # None 表示在 n_max 步内未越过 u
    n_max: int
    log_pi_at_stop: float
    y_at_stop: float
    m_prev: float  # M_{τ-1}
    log_weight: float
    overflowed: bool = False

    @property
    def censored(self) -> bool:
        return self.tau is None


# 估计结果中由充分统计量决定的字段，其余进入 metadata
_ESTIMATE_FIELDS = (
    "value", "stderr", "n_samples", "ess", "censored_weight",
    "sum_w", "sum_w2", "n_censored",
)


@dataclass
class EstimateRecord:
    """加权均值估计及其充分统计量 (Σw, Σw², n)"""
    value: float
    stderr: float
    n_samples: int
    ess: float
    censored_weight: float
    sum_w: float = 0.0
    sum_w2: float = 0.0
    n_censored: int = 0
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_sums(cls, sum_w: float, sum_w2: float, n: int, n_censored: int = 0,
                  metadata: dict | None = None) -> "EstimateRecord":
        """由充分统计量构造；stderr = √((Σw² − (Σw)²/n) / (n(n−1)))"""
        if n <= 0:
            raise ValueError("样本数必须为正")
        value = sum_w / n
        if n > 1:
            var_sum = max(sum_w2 - sum_w * sum_w / n, 0.0)
            stderr = math.sqrt(var_sum / (n * (n - 1)))
        else:
            stderr = 0.0
        ess = (sum_w * sum_w / sum_w2) if sum_w2 > 0 else 0.0
        return cls(
            value=value,
            stderr=stderr,
            n_samples=n,
            ess=min(ess, float(n)),
            censored_weight=n_censored / n,
            sum_w=sum_w,
            sum_w2=sum_w2,
            n_censored=n_censored,
            metadata=dict(metadata or {}),
        )

    @property
    def low_confidence(self) -> bool:
        return self.ess < 100

    def to_dict(self) -> dict:
        data = {name: getattr(self, name) for name in _ESTIMATE_FIELDS}
        data.update(self.metadata)
        data["low_confidence"] = self.low_confidence
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateRecord":
        base = {name: data[name] for name in _ESTIMATE_FIELDS if name in data}
        meta = {k: v for k, v in data.items() if k not in _ESTIMATE_FIELDS and k != "low_confidence"}
        base["n_samples"] = int(base["n_samples"])
        base["n_censored"] = int(base.get("n_censored", 0))
        return cls(**base, metadata=meta)


@dataclass(frozen=True)
class CumulantProfile:
    """一个 A 分布的累积量常数"""
    alpha_min: float
    e_log_a: float
    alpha0: float | None
    rho0: float | None
    sigma0: float | None
    tolerance: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HypothesisReport:
    """两个定理的前提条件检查结果；h_support 为 None 表示无法判定"""
    h_contractive: bool
    h_moments: bool
    moment_eps: float
    h_index: bool
    h_support: bool | None
    h_density: bool
    thm2_regime: bool
    alpha_used: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GridRow:
    """网格上一个 u 点的估计与归一化常数"""
    u: float
    k_u: int
    theta: float
    p_hat: float
    stderr: float
    ess: float
    c_hat: float
    excluded: bool = False  # ESS 不足，不参与回归


@dataclass
class GridReport:
    rows: list[GridRow]
    slope: float
    slope_ci: tuple[float, float]
    c_mean: float
    c_rel_spread: float
    regime_tag: str

    @property
    def n_excluded(self) -> int:
        return sum(1 for r in self.rows if r.excluded)

    def summary(self) -> dict:
        """JSON 摘要（字段名固定）"""
        return {
            "slope": self.slope,
            "slope_ci_lo": self.slope_ci[0],
            "slope_ci_hi": self.slope_ci[1],
            "c_mean": self.c_mean,
            "c_rel_spread": self.c_rel_spread,
            "regime_tag": self.regime_tag,
        }


@dataclass(frozen=True)
class CltDiagnostics:
    """首达时间中心极限定理的诊断量"""
    mean_ratio: float
    ks_sigma0: float
    ks_var0: float
    hits: int
    n_paths: int
    scale_sigma0: float
    scale_var0: float

    def to_dict(self) -> dict:
        return asdict(self)
