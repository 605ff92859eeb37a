"""log ĉ 对 log u 的加权最小二乘拟合"""
import dataclasses
import math

import numpy as np
from scipy import stats

from src.models.records import GridReport, GridRow

MIN_ESS = 100
CI_LEVEL = 0.95


def _usable(row: GridRow) -> bool:
    return not row.excluded and row.c_hat > 0 and math.isfinite(row.c_hat)


def fit_grid(rows: list[GridRow], regime_tag: str, min_ess: float = MIN_ESS) -> GridReport:
    """标记 ESS 不足的行并拟合斜率；行权重 (p̂/stderr)²，任一行 stderr 为 0 时退化为等权"""
    rows = [dataclasses.replace(r, excluded=r.ess < min_ess) for r in rows]
    used = [r for r in rows if _usable(r)]
    nan = float("nan")
    if not used:
        return GridReport(rows=rows, slope=nan, slope_ci=(nan, nan), c_mean=nan,
                          c_rel_spread=nan, regime_tag=regime_tag)

    c = np.array([r.c_hat for r in used])
    c_mean = float(np.mean(c))
    c_rel_spread = float((np.max(c) - np.min(c)) / c_mean)
    if len(used) < 3:
        return GridReport(rows=rows, slope=nan, slope_ci=(nan, nan), c_mean=c_mean,
                          c_rel_spread=c_rel_spread, regime_tag=regime_tag)

    x = np.log([r.u for r in used])
    y = np.log(c)
    se = np.array([r.stderr for r in used])
    p = np.array([r.p_hat for r in used])
    w = (p / se) ** 2 if np.all(se > 0) else np.ones_like(x)
    w = w / np.mean(w)

    xb = np.sum(w * x) / np.sum(w)
    yb = np.sum(w * y) / np.sum(w)
    sxx = float(np.sum(w * (x - xb) ** 2))
    slope = float(np.sum(w * (x - xb) * (y - yb)) / sxx)
    resid = y - yb - slope * (x - xb)
    dof = len(used) - 2
    s2 = float(np.sum(w * resid ** 2)) / dof
    half = float(stats.t.ppf(0.5 + CI_LEVEL / 2, dof)) * math.sqrt(s2 / sxx)

    return GridReport(
        rows=rows,
        slope=slope,
        slope_ci=(slope - half, slope + half),
        c_mean=c_mean,
        c_rel_spread=c_rel_spread,
        regime_tag=regime_tag,
    )


def extrapolate_constant(rows: list[GridRow], min_ess: float = MIN_ESS) -> tuple[float, float]:
    """ĉ(u) ≈ c∞ + b/log u 的加权拟合，返回 (c∞, stderr)

    单点常数的有限 u 偏差约按 1/log u 衰减；少于 3 个可用行时返回 NaN。
    """
    used = [r for r in rows if r.ess >= min_ess and _usable(r)]
    if len(used) < 3:
        return float("nan"), float("nan")
    x = 1.0 / np.log([r.u for r in used])
    y = np.array([r.c_hat for r in used])
    se = np.array([r.stderr / r.p_hat * r.c_hat for r in used])
    w = 1.0 / se ** 2 if np.all(se > 0) else np.ones_like(x)
    design = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(design.T @ (w[:, None] * design))
    coef = cov @ design.T @ (w * y)
    resid = y - design @ coef
    scale = float(np.sum(w * resid ** 2)) / (len(used) - 2)
    return float(coef[0]), math.sqrt(max(scale, 0.0) * cov[0, 0])
