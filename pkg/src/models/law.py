"""创新分布 (A, B) 的参数化定义

A、B 结构上相互独立，JSON 格式:
    {"A": {"type": "lognormal", "mu": -1.0, "sigma": 1.414}, "B": {"type": "const", "value": 1.0}}
未知字段直接报错。
"""
import json
import math
import re
from dataclasses import dataclass
from typing import Annotated, Literal, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator


class _LawModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------- A 的边际分布 ----------

class LogNormalA(_LawModel):
    """log A ~ Normal(mu, sigma²)"""
    type: Literal["lognormal"] = "lognormal"
    mu: float
    sigma: float = Field(gt=0)


class UniformA(_LawModel):
    """A ~ Uniform[lo, hi]"""
    type: Literal["uniform"] = "uniform"
    lo: float = Field(gt=0)
    hi: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_order(self):
        if not self.lo < self.hi:
            raise ValueError(f"uniform 要求 lo < hi，当前 lo={self.lo}, hi={self.hi}")
        return self


class TwoPointA(_LawModel):
    """A = a1 (概率 p1) 或 a2 (概率 1-p1)；格点分布，仅供预言机/模拟使用"""
    type: Literal["twopoint"] = "twopoint"
    a1: float = Field(gt=0)
    p1: float = Field(ge=0, le=1)
    a2: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_order(self):
        if not self.a1 < self.a2:
            raise ValueError(f"twopoint 要求 a1 < a2，当前 a1={self.a1}, a2={self.a2}")
        return self

    def atoms(self) -> list[tuple[float, float]]:
        """正概率原子 [(值, 概率)]"""
        return [(v, p) for v, p in ((self.a1, self.p1), (self.a2, 1.0 - self.p1)) if p > 0]


ALawSpec = Annotated[Union[LogNormalA, UniformA, TwoPointA], Field(discriminator="type")]


# ---------- B 的边际分布 ----------

class ConstB(_LawModel):
    type: Literal["const"] = "const"
    value: float


class UniformB(_LawModel):
    type: Literal["uniform"] = "uniform"
    lo: float
    hi: float

    @model_validator(mode="after")
    def _check_order(self):
        if not self.lo < self.hi:
            raise ValueError(f"uniform 要求 lo < hi，当前 lo={self.lo}, hi={self.hi}")
        return self


class ExponentialB(_LawModel):
    type: Literal["exponential"] = "exponential"
    rate: float = Field(gt=0)


class TwoPointB(_LawModel):
    type: Literal["twopoint"] = "twopoint"
    b1: float
    p1: float = Field(ge=0, le=1)
    b2: float

    def atoms(self) -> list[tuple[float, float]]:
        return [(v, p) for v, p in ((self.b1, self.p1), (self.b2, 1.0 - self.p1)) if p > 0]


BLawSpec = Annotated[Union[ConstB, UniformB, ExponentialB, TwoPointB], Field(discriminator="type")]


class InnovationLaw(_LawModel):
    """(A, B) 的联合分布，A ⊥ B"""
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    a: ALawSpec = Field(alias="A")
    b: BLawSpec = Field(alias="B")

    @property
    def is_lattice(self) -> bool:
        """log A 是否格点分布（TwoPoint A 仅供预言机/模拟）"""
        return isinstance(self.a, TwoPointA)

    def to_json_dict(self) -> dict:
        return self.model_dump(by_alias=True)


def parse_law(data: dict | str) -> InnovationLaw:
    """从 dict 或 JSON 文本解析创新分布"""
    if isinstance(data, str):
        data = json.loads(data)
    return InnovationLaw.model_validate(data)


@dataclass(frozen=True)
class TiltedALaw:
    """指数倾斜后的 A: 密度 a^s f_A(a) / λ(s)

    closed_form 为倾斜后仍属同一参数族时的显式分布（LogNormal、TwoPoint），
    Uniform 倾斜后是幂密度，closed_form 为 None，用逆 CDF 采样。
    """
    base: LogNormalA | UniformA | TwoPointA
    s: float
    log_normalizer: float
    closed_form: LogNormalA | UniformA | TwoPointA | None = None


# ---------- 尺度字段: 支持 "e^8" / "exp(8)" 写法 ----------

_EXP_PATTERN = re.compile(r"^\s*(?:e\^|exp\()\s*([-+0-9.eE]+)\s*\)?\s*$")


def _parse_scale(value):
    if isinstance(value, str):
        m = _EXP_PATTERN.match(value)
        if m:
            return math.exp(float(m.group(1)))
        return float(value)
    return value


PositiveScale = Annotated[float, BeforeValidator(_parse_scale), Field(gt=0)]


# ---------- 小规模离散实例（精确枚举用） ----------

MAX_ENUM_DEPTH = 22


def _check_atoms(atoms: list[tuple[float, float]], name: str):
    if not atoms:
        raise ValueError(f"{name} 不能为空")
    if any(p < 0 for _, p in atoms):
        raise ValueError(f"{name} 含负概率")
    total = sum(p for _, p in atoms)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"{name} 概率之和为 {total!r}，应为 1")


class DiscreteInstance(_LawModel):
    """原子分布 (A, B) 与首达问题的参数"""
    a_atoms: list[tuple[float, float]]
    b_atoms: list[tuple[float, float]]
    n_max: int = Field(ge=1, le=MAX_ENUM_DEPTH)
    u: PositiveScale

    @model_validator(mode="after")
    def _check(self):
        _check_atoms(self.a_atoms, "a_atoms")
        _check_atoms(self.b_atoms, "b_atoms")
        if any(a <= 0 for a, _ in self.a_atoms):
            raise ValueError("a_atoms 的取值必须为正")
        return self

    @property
    def branching(self) -> int:
        return len(self.a_atoms) * len(self.b_atoms)
