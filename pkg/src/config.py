import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings

from src.core.errors import ConfigError
from src.models.law import InnovationLaw, PositiveScale

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """环境变量配置（前缀 PERPWATCH_）"""

    # 并行
    threads: int = Field(default=0, ge=0)  # 0 = CPU 核数
    batch_size: int = Field(default=8192, ge=1)  # 每个随机子流的路径数

    # 日志
    log_level: str = "INFO"

    model_config = {"env_prefix": "PERPWATCH_", "env_file": ".env", "env_file_encoding": "utf-8"}

    @property
    def effective_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


@lru_cache
def get_settings() -> Settings:
    return Settings()


# ---------- 实验配置 ----------

class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AnalyzeBlock(_Block):
    rho: float


class SimulateBlock(_Block):
    """simulate 命令: 单点估计"""
    target: Literal["pointwise", "ruin", "clt", "constant"]
    rho: float | None = None
    beta: float | None = None
    u: PositiveScale | None = None
    samples: int = Field(default=100_000, ge=2)
    method: Literal["tilted", "twophase", "naive"] = "tilted"
    seed: int | None = Field(default=None, ge=0)
    horizon_factor: int = Field(default=4, ge=2)
    hits: int = Field(default=10_000, ge=10)
    # 常数级数
    alpha: float | None = Field(default=None, gt=0)
    L: int = Field(default=30, ge=0)
    eps: float = Field(default=0.0, ge=0)
    delta: float = Field(default=0.0, ge=0)
    gamma: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _check_target(self):
        if self.target in ("pointwise", "ruin", "clt") and self.u is None:
            raise ValueError(f"target={self.target} 需要 u")
        if self.target == "pointwise" and self.rho is None:
            raise ValueError("target=pointwise 需要 rho")
        if self.target == "constant" and self.alpha is None:
            raise ValueError("target=constant 需要 alpha")
        return self


class GridSpec(_Block):
    lo: PositiveScale
    hi: PositiveScale
    points: int = Field(ge=6)
    spacing: Literal["geometric"] = "geometric"

    @model_validator(mode="after")
    def _check_order(self):
        if not self.lo < self.hi:
            raise ValueError(f"u_grid 要求 lo < hi，当前 lo={self.lo}, hi={self.hi}")
        return self

    def values(self) -> list[float]:
        return [float(u) for u in np.geomspace(self.lo, self.hi, self.points)]


class VerifyBlock(_Block):
    """verify 命令: u 网格上的渐近验证"""
    regime: Literal["thm1", "thm2", "kg"]
    rho: float | None = None
    beta: float | None = None
    method: Literal["tilted", "twophase", "naive"] | None = None  # 默认按 regime 选择
    u_grid: GridSpec
    samples: int = Field(default=100_000, ge=2)
    seed: int | None = Field(default=None, ge=0)
    horizon_factor: int = Field(default=4, ge=2)

    @model_validator(mode="after")
    def _check_regime(self):
        if self.regime in ("thm1", "thm2") and self.rho is None:
            raise ValueError(f"regime={self.regime} 需要 rho")
        return self

    @property
    def resolved_method(self) -> str:
        if self.method:
            return self.method
        return "twophase" if self.regime == "thm2" else "tilted"


class WalkQuery(_Block):
    n: int = Field(ge=1)
    c: float
    gamma: float = 0.0
    j_n: int = Field(default=0, ge=0)
    delta_n: float = 0.0
    envelope: float | None = Field(default=None, gt=0)


class WalkBlock(_Block):
    """walk 命令: 乘性随机游走的 Petrov 近似"""
    queries: list[WalkQuery] = Field(min_length=1)
    mc_samples: int | None = Field(default=None, ge=1000)
    seed: int | None = Field(default=None, ge=0)


class OracleBlock(_Block):
    """oracle 命令: 未给原子时从 law 推出"""
    a_atoms: list[tuple[float, float]] | None = None
    b_atoms: list[tuple[float, float]] | None = None
    n_max: int = Field(ge=1)
    u: PositiveScale


class ExperimentConfig(_Block):
    """一次实验的完整配置（单个 JSON 文件）"""
    law: InnovationLaw | None = None
    analyze: AnalyzeBlock | None = None
    simulate: SimulateBlock | None = None
    verify: VerifyBlock | None = None
    walk: WalkBlock | None = None
    oracle: OracleBlock | None = None

    def require(self, block: str):
        """取出命令对应的配置块，缺失即配置错误"""
        value = getattr(self, block)
        if value is None:
            raise ConfigError(f"配置缺少 {block} 块")
        if block != "oracle" and self.law is None:
            raise ConfigError(f"{block} 命令需要 law")
        return value


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """从 JSON（或 YAML）文件加载实验配置"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件解析失败: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError("配置文件顶层必须是对象")

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {e}") from e

    logger.debug(f"[配置] 已加载 {path}")
    return config
