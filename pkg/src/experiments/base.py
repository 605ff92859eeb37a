import concurrent.futures
import dataclasses
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from src.config import get_settings
from src.core.rng import derive_seed
from src.experiments.fitting import fit_grid
from src.models.law import InnovationLaw
from src.models.records import GridReport, GridRow

logger = logging.getLogger(__name__)


@dataclass
class GridContext:
    """网格实验的运行参数"""
    law: InnovationLaw
    u_grid: list[float]
    samples: int
    seed: int
    rho: float | None = None
    beta: float | None = None
    method: str = "tilted"  # tilted / twophase / naive
    horizon_factor: int = 4
    threads: int | None = None
    batch_size: int | None = None
    extra: dict = field(default_factory=dict)  # 实验附带的诊断信息

    def point_seed(self, index: int) -> int:
        """第 index 个网格点的独立种子"""
        return derive_seed(self.seed, index)


class BaseExperiment(ABC):
    """网格实验抽象基类: collect 并行估计各网格点，analyze 拟合回归"""

    name: str = ""
    display_name: str = ""
    description: str = ""
    regime_tag: str = ""

    @abstractmethod
    def estimate_point(self, context: GridContext, index: int, u: float) -> GridRow:
        """单个 u 点的估计与归一化"""
        ...

    def prepare(self, context: GridContext):
        """运行前的准备（求解 α、β 等），子类可重写"""

    def collect(self, context: GridContext) -> list[GridRow]:
        """网格点在线程池中并行估计，结果按网格顺序返回

        每个点有自己的种子，外层 worker 数与点内批次线程数的分配不影响结果。
        """
        threads = max(1, context.threads or get_settings().effective_threads)
        workers = max(1, min(threads, len(context.u_grid)))
        point_context = dataclasses.replace(context, threads=max(1, threads // workers))
        logger.debug(f"[网格] {len(context.u_grid)} 个网格点，{workers} 个 worker，"
                     f"点内 {point_context.threads} 线程")

        def estimate(item: tuple[int, float]) -> GridRow:
            i, u = item
            return self.estimate_point(point_context, i, u)

        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(estimate, enumerate(context.u_grid)))
        for row in rows:
            logger.info(
                f"[网格] {self.display_name} u=e^{math.log(row.u):.3f} k_u={row.k_u} "
                f"p̂={row.p_hat:.4e} ĉ={row.c_hat:.4g} ESS={row.ess:.0f}"
            )
        return rows

    def analyze(self, context: GridContext, rows: list[GridRow]) -> GridReport:
        return fit_grid(rows, self.regime_tag)

    def run(self, context: GridContext) -> GridReport:
        """标准执行流程"""
        logger.info(f"Experiment [{self.display_name}] 开始执行，{len(context.u_grid)} 个网格点")
        try:
            self.prepare(context)
            rows = self.collect(context)
            report = self.analyze(context, rows)
        except Exception as e:
            logger.error(f"Experiment [{self.display_name}] 执行失败: {e}")
            raise

        logger.info(
            f"Experiment [{self.display_name}] 完成: slope={report.slope:.4g} "
            f"CI=[{report.slope_ci[0]:.4g}, {report.slope_ci[1]:.4g}] "
            f"ĉ均值={report.c_mean:.4g} 相对极差={report.c_rel_spread:.3g}"
        )
        if report.n_excluded:
            logger.warning(f"Experiment [{self.display_name}] {report.n_excluded} 个网格点 ESS 不足，未参与拟合")
        return report
