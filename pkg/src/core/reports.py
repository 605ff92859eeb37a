"""网格报告与枚举结果的文件输出（CSV 使用 LF 换行）"""
import csv
import io
import json
import logging
import math
from pathlib import Path

from src.models.records import GridReport, GridRow

logger = logging.getLogger(__name__)

GRID_HEADER = ["u", "k_u", "theta", "p_hat", "stderr", "ess", "c_hat"]
ORACLE_HEADER = ["k", "prob"]


def json_safe(value):
    """递归把 NaN、±∞ 换成 None，输出严格 JSON"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    return value


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def grid_csv_text(report: GridReport) -> str:
    return _csv_text(GRID_HEADER, [
        [repr(r.u), r.k_u, repr(r.theta), repr(r.p_hat), repr(r.stderr), repr(r.ess), repr(r.c_hat)]
        for r in report.rows
    ])


def read_grid_rows(path: str | Path) -> list[GridRow]:
    """读回网格 CSV，用于离线重新拟合"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return [
            GridRow(
                u=float(rec["u"]),
                k_u=int(rec["k_u"]),
                theta=float(rec["theta"]),
                p_hat=float(rec["p_hat"]),
                stderr=float(rec["stderr"]),
                ess=float(rec["ess"]),
                c_hat=float(rec["c_hat"]),
            )
            for rec in csv.DictReader(f)
        ]


def oracle_csv_text(pmf: dict[int, float]) -> str:
    return _csv_text(ORACLE_HEADER, [[k, repr(p)] for k, p in sorted(pmf.items())])


def save_grid_report(report: GridReport, out: str | Path) -> tuple[Path, Path]:
    """写出 <out>.csv 与 <out>.json"""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_name(out.name + ".csv")
    json_path = out.with_name(out.name + ".json")

    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(grid_csv_text(report))
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(json_safe(report.summary()), f, ensure_ascii=False, indent=2, allow_nan=False)
        f.write("\n")

    logger.info(f"[报告] 已写出 {csv_path} 与 {json_path}")
    return csv_path, json_path
