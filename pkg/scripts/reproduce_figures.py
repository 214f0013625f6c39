#!/usr/bin/env python3
"""
图表数据导出脚本
输出 p_s 随 Purcell 因子 / 失谐的变化，以及三个协议的成功概率曲线（只写 CSV，不绘图）

使用方法:
    python scripts/reproduce_figures.py --dir figures
"""

import argparse
import sys
from pathlib import Path

# 添加项目根目录到 Python 路径
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.cli.main import sweep_rows, sweep_values  # noqa: E402
from src.cli.output import write_csv  # noqa: E402
from src.core.config import init_logging  # noqa: E402
from src.core.models import EmitterParams  # noqa: E402
from src.services.scattering import reflection_probability  # noqa: E402

# 失谐曲线对应的 Purcell 因子
DETUNING_CURVES = (1.0, 5.0, 10.0, 50.0)


def export_purcell_curve(output_dir: Path, num: int, stop: float) -> Path:
    """p_s 随 P 变化（Δ = 0）"""
    path = output_dir / "ps_vs_purcell.csv"
    values = sweep_values(1.0, stop, num, "linear")
    write_csv(["purcell", "p_s"], sweep_rows("purcell", values, float("inf"), 0.0, False), path)
    return path


def export_detuning_curves(output_dir: Path, num: int, stop: float) -> Path:
    """p_s 随 Δ 变化，每个 Purcell 因子一列"""
    path = output_dir / "ps_vs_detuning.csv"
    values = sweep_values(0.0, stop, num, "linear")
    header = ["detuning"] + [f"p_s_P{purcell:g}" for purcell in DETUNING_CURVES]
    rows = [
        [detuning] + [reflection_probability(EmitterParams(purcell=p, detuning=detuning)) for p in DETUNING_CURVES]
        for detuning in values
    ]
    write_csv(header, rows, path)
    return path


def export_protocol_curves(output_dir: Path, num: int, stop: float) -> Path:
    """创建、交换、提纯的成功概率 p1、p2、p3 随 P 变化（Δ = 0）"""
    path = output_dir / "protocols_vs_purcell.csv"
    values = sweep_values(1.0, stop, num, "linear")
    write_csv(["purcell", "p_s", "p1", "p2", "p3"], sweep_rows("purcell", values, float("inf"), 0.0, True), path)
    return path


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="导出图表数据")
    parser.add_argument("--dir", "-d", default="figures", help="输出目录")
    parser.add_argument("--num", "-n", type=int, default=200, help="每条曲线的格点数")
    parser.add_argument("--purcell-max", type=float, default=100.0, help="Purcell 因子上限")
    parser.add_argument("--detuning-max", type=float, default=1.0, help="失谐上限")
    args = parser.parse_args()

    init_logging()
    output_dir = Path(args.dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    print(f"输出目录: {output_dir}")
    for written in (
        export_purcell_curve(output_dir, args.num, args.purcell_max),
        export_detuning_curves(output_dir, args.num, args.detuning_max),
        export_protocol_curves(output_dir, args.num, args.purcell_max),
    ):
        print(f"已写入: {written}")
