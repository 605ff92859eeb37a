"""统一异常定义 - 每类异常对应 CLI 退出码"""


class PerpWatchError(Exception):
    """所有业务异常的基类"""

    exit_code: int = 3


class ConfigError(PerpWatchError):
    """配置文件错误（缺字段、未知字段、数值不满足前置条件）"""

    exit_code = 2


class RangeError(PerpWatchError, ValueError):
    """参数超出 Λ' 的可达范围"""


class DomainError(PerpWatchError, ValueError):
    """参数不在运算定义域内"""


class NoRootError(PerpWatchError):
    """Cramér 根不存在（Λ 在搜索区间内恒为负）"""


class LatticeLawError(PerpWatchError):
    """格点分布不适用 Petrov 近似"""


class GuardError(PerpWatchError):
    """枚举路径数超过上限"""


class MixedTargetError(PerpWatchError):
    """合并了不同目标/调度的估计结果"""
