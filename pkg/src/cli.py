"""命令行入口: analyze / simulate / verify / walk / oracle

标准输出只放机器可读结果；日志与错误 JSON 走标准错误。
退出码: 0 成功，2 配置错误，3 求解/定义域错误，4 低置信度 (ESS < 100)，5 网格退化。
"""
import functools
import json
import logging
import math
import sys
from pathlib import Path

import click
from pydantic import ValidationError

from src.config import ExperimentConfig, get_settings, load_experiment_config
from src.core.cgf import (
    alpha_bar, cramer_root, default_beta, hypothesis_report, rate_I, regime_boundary, solve_alpha,
)
from src.core.engine import (
    clt_diagnostics, estimate_constant_series, estimate_pointwise, estimate_pointwise_twophase,
    estimate_ruin,
)
from src.core.errors import ConfigError, DomainError, PerpWatchError
from src.core.oracle import exact_tau_pmf, instance_from_law
from src.core.reports import json_safe, oracle_csv_text, save_grid_report
from src.core.rng import derive_seed
from src.core.walk_ldp import (
    PetrovQuery, exact_gaussian_walk_tail, mc_walk_tail, petrov_prob, petrov_shifted,
)
from src.experiments.asymptotics import kesten_goldie_grid, run_grid
from src.models.law import DiscreteInstance, LogNormalA

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LOW_CONFIDENCE = 4
EXIT_DEGENERATE_GRID = 5

_LOG_FORMAT = "%(asctime)s %(levelname)-5s [%(name)s] %(message)s"


def setup_logging(level: str | None = None):
    """配置日志: 单个 stderr 控制台处理器（重复调用时替换）"""
    root = logging.getLogger()
    root.setLevel((level or get_settings().log_level).upper())
    for handler in list(root.handlers):
        if getattr(handler, "_perpwatch", False):
            root.removeHandler(handler)

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter(_LOG_FORMAT, datefmt="%H:%M:%S"))
    console._perpwatch = True
    root.addHandler(console)


def _emit(data: dict):
    click.echo(json.dumps(json_safe(data), ensure_ascii=False, allow_nan=False))


def _fail(error: Exception, code: int):
    click.echo(json.dumps({"error": type(error).__name__, "message": str(error)}, ensure_ascii=False), err=True)
    sys.exit(code)


def guarded(fn):
    """把库异常映射为退出码与 stderr 上的错误 JSON"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PerpWatchError as e:
            logger.error(f"[命令] {type(e).__name__}: {e}")
            _fail(e, e.exit_code)
        except ValidationError as e:
            _fail(e, EXIT_CONFIG)

    return wrapper


def common_options(fn):
    fn = click.option("--threads", type=int, default=None, help="线程数（默认 CPU 核数）")(fn)
    fn = click.option("--log-level", default=None, help="日志级别")(fn)
    fn = click.argument("config", type=click.Path(dir_okay=False, path_type=Path))(fn)
    return fn


def _load(config: Path, log_level: str | None) -> ExperimentConfig:
    setup_logging(log_level)
    return load_experiment_config(config)


def _require_seed(seed: int | None) -> int:
    if seed is None:
        raise ConfigError("随机实验必须给出 seed（配置文件或 --seed）")
    return seed


@click.group()
def main():
    """PerpWatch - 永续序列首达时间的大偏差分析"""


# ---------- analyze ----------

def cmd_analyze(cfg: ExperimentConfig) -> dict:
    block = cfg.require("analyze")
    law = cfg.law
    alpha = solve_alpha(law, block.rho)
    profile = cramer_root(law, strict=False)
    report = hypothesis_report(law, alpha)

    result = {"alpha": alpha}
    warnings = []
    try:
        result["alpha_bar"] = alpha_bar(law, alpha)
        result["rate_I"] = rate_I(law, block.rho)
    except DomainError as e:
        result["alpha_bar"] = result["rate_I"] = None
        warnings.append(str(e))
    result.update(
        alpha_min=profile.alpha_min,
        alpha0=profile.alpha0,
        rho0=profile.rho0,
        sigma0=profile.sigma0,
        e_log_a=profile.e_log_a,
        hypothesis_report=report.to_dict(),
    )
    boundary = regime_boundary(law)
    result["regime_boundary"] = (
        {"alpha_tilde": boundary[0], "rho_tilde": boundary[1]} if boundary else None
    )
    if law.is_lattice:
        warnings.append("oracle-only law: log A 为格点分布，Petrov 近似不适用")
    if warnings:
        result["warning"] = "; ".join(warnings)
    return result


@main.command()
@common_options
@guarded
def analyze(config: Path, log_level: str | None, threads: int | None):
    """累积量常数、指数 ᾱ 与前提条件报告"""
    _emit(cmd_analyze(_load(config, log_level)))


# ---------- simulate ----------

def cmd_simulate(cfg: ExperimentConfig, seed: int | None = None, samples: int | None = None,
                 threads: int | None = None) -> dict:
    block = cfg.require("simulate")
    law = cfg.law
    seed = _require_seed(seed if seed is not None else block.seed)
    samples = samples or block.samples

    if block.target == "clt":
        return clt_diagnostics(law, block.u, block.hits, seed, block.horizon_factor,
                               threads=threads).to_dict()
    if block.target == "ruin":
        record = estimate_ruin(law, block.u, samples, block.horizon_factor, seed, threads=threads)
    elif block.target == "constant":
        method = "naive" if block.method == "naive" else "tilted"
        record = estimate_constant_series(
            law, block.alpha, block.L, samples, seed, eps=block.eps, delta=block.delta,
            gamma=block.gamma, method=method, threads=threads,
        )
    elif block.method == "twophase":
        beta = block.beta if block.beta is not None else default_beta(law, solve_alpha(law, block.rho))
        record = estimate_pointwise_twophase(law, block.rho, beta, block.u, samples, seed, threads=threads)
    else:
        record = estimate_pointwise(law, block.rho, block.u, samples, seed,
                                    naive=block.method == "naive", threads=threads)
    return record.to_dict()


@main.command()
@common_options
@click.option("--seed", type=int, default=None, help="覆盖配置中的种子")
@click.option("--samples", type=int, default=None, help="覆盖配置中的路径数")
@guarded
def simulate(config: Path, log_level: str | None, threads: int | None, seed: int | None,
             samples: int | None):
    """单点稀有事件估计"""
    result = cmd_simulate(_load(config, log_level), seed, samples, threads)
    _emit(result)
    if result.get("low_confidence"):
        logger.warning(f"[命令] ESS={result['ess']:.1f} < 100，结果置信度低")
        sys.exit(EXIT_LOW_CONFIDENCE)


# ---------- verify ----------

def cmd_verify(cfg: ExperimentConfig, out: Path, seed: int | None = None, samples: int | None = None,
               threads: int | None = None):
    block = cfg.require("verify")
    seed = _require_seed(seed if seed is not None else block.seed)
    samples = samples or block.samples
    grid = block.u_grid.values()

    if block.regime == "kg":
        report = kesten_goldie_grid(cfg.law, grid, samples, seed, block.horizon_factor, threads=threads)
    else:
        report = run_grid(cfg.law, block.rho, grid, samples, block.resolved_method, seed,
                          beta=block.beta, regime=block.regime, threads=threads)
    save_grid_report(report, out)
    return report


@main.command()
@common_options
@click.option("--seed", type=int, default=None, help="覆盖配置中的种子")
@click.option("--samples", type=int, default=None, help="覆盖每个网格点的路径数")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="输出前缀，写出 <out>.csv 与 <out>.json（默认与配置文件同名）")
@guarded
def verify(config: Path, log_level: str | None, threads: int | None, seed: int | None,
           samples: int | None, out: Path | None):
    """u 网格上的渐近验证"""
    report = cmd_verify(_load(config, log_level), out or config.with_suffix(""), seed, samples, threads)
    _emit(report.summary())
    if report.n_excluded * 2 > len(report.rows):
        logger.warning(f"[命令] {report.n_excluded}/{len(report.rows)} 个网格点 ESS 不足")
        sys.exit(EXIT_DEGENERATE_GRID)


# ---------- walk ----------

def cmd_walk(cfg: ExperimentConfig, seed: int | None = None, threads: int | None = None) -> list[dict]:
    block = cfg.require("walk")
    law = cfg.law
    if block.mc_samples:
        seed = _require_seed(seed if seed is not None else block.seed)

    records = []
    for i, q in enumerate(block.queries):
        alpha = solve_alpha(law, q.c)
        record = {
            "n": q.n,
            "c": q.c,
            "gamma_n": q.gamma,
            "alpha": alpha,
            "petrov_prob": petrov_prob(law, PetrovQuery(n=q.n, c=q.c, gamma_n=q.gamma, alpha=alpha)),
        }
        if q.j_n or q.delta_n:
            record.update(
                j_n=q.j_n,
                delta_n=q.delta_n,
                petrov_shifted=petrov_shifted(law, q.n, q.j_n, q.delta_n, alpha, q.envelope),
            )
        level = q.n * (q.c + q.gamma)
        if isinstance(law.a, LogNormalA):
            record["exact_gaussian"] = exact_gaussian_walk_tail(law.a.mu, law.a.sigma, q.n, math.exp(level))
        if block.mc_samples:
            tilt = solve_alpha(law, q.c + q.gamma)
            est = mc_walk_tail(law, q.n, math.exp(level), block.mc_samples, tilt, derive_seed(seed, i),
                               threads=threads)
            record["mc"] = {"value": est.value, "stderr": est.stderr, "ess": est.ess, "alpha": tilt}
        records.append(record)
    return records


@main.command()
@common_options
@click.option("--seed", type=int, default=None, help="覆盖配置中的种子")
@guarded
def walk(config: Path, log_level: str | None, threads: int | None, seed: int | None):
    """乘性随机游走的 Petrov 近似（每个查询一行 JSON）"""
    for record in cmd_walk(_load(config, log_level), seed, threads):
        _emit(record)


# ---------- oracle ----------

def cmd_oracle(cfg: ExperimentConfig) -> tuple[dict[int, float], float]:
    block = cfg.require("oracle")
    if block.a_atoms is not None and block.b_atoms is not None:
        inst = DiscreteInstance(a_atoms=block.a_atoms, b_atoms=block.b_atoms, n_max=block.n_max, u=block.u)
    elif cfg.law is not None:
        inst = instance_from_law(cfg.law, block.n_max, block.u)
    else:
        raise ConfigError("oracle 需要 a_atoms/b_atoms 或 law")
    return exact_tau_pmf(inst)


@main.command()
@common_options
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="同时写出 CSV 文件")
@guarded
def oracle(config: Path, log_level: str | None, threads: int | None, out: Path | None):
    """精确枚举 τ_u 的分布（CSV: k,prob）"""
    pmf, censored = cmd_oracle(_load(config, log_level))
    text = oracle_csv_text(pmf)
    click.echo(text, nl=False)
    logger.info(f"[预言机] 删失质量 P[τ_u > n_max] = {censored:.6g}")
    if out:
        out.write_text(text, encoding="utf-8", newline="\n")
