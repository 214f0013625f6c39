#!/usr/bin/env python3
"""
heraldsim 命令行
coeff 查询散射系数，sweep 输出参数扫描 CSV，run 运行协议并输出 key=value 汇总
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from typing import Any

import numpy as np
from pydantic import ValidationError

from src.cli.config import RunConfig, build_run_config
from src.cli.output import key_value_lines, write_csv
from src.core.config import init_logging
from src.core.exceptions import ConfigError, HeraldSimError
from src.core.models import EmitterParams, EvaluationMode, ProtocolSummary
from src.services.creation import run_creation
from src.services.protocols import analytic_protocol_success
from src.services.purification import PurificationStatistics, run_purification
from src.services.scattering import SpectralWavepacket, compute_coefficients, reflection_probability
from src.services.swapping import run_swapping
from src.services.trials import TrialSpec, run_trials

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2


def cmd_coeff(args: argparse.Namespace) -> int:
    params = EmitterParams(purcell=args.purcell, detuning=args.detuning)
    coefficients = compute_coefficients(params)
    pairs = [
        ("purcell", params.purcell),
        ("detuning", params.detuning),
        ("r", coefficients.r),
        ("t", coefficients.t),
        ("loss", coefficients.loss),
        ("p_s", reflection_probability(params)),
    ]
    sys.stdout.write(key_value_lines(pairs))
    return EXIT_OK


def sweep_values(start: float, stop: float, num: int, scale: str) -> list[float]:
    """扫描格点（linear 或 log）"""
    if num < 1:
        raise ConfigError("sweep range is empty", {"num": num})
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log sweeps need positive bounds", {"start": start, "stop": stop})
        return [float(v) for v in np.geomspace(start, stop, num)]
    return [float(v) for v in np.linspace(start, stop, num)]


def sweep_rows(axis: str, values: Sequence[float], purcell: float, detuning: float, protocols: bool) -> list[list[float]]:
    rows: list[list[float]] = []
    for value in values:
        params = EmitterParams(
            purcell=value if axis == "purcell" else purcell,
            detuning=value if axis == "detuning" else detuning,
        )
        row = [value, reflection_probability(params)]
        if protocols:
            row.extend(analytic_protocol_success(params))
        rows.append(row)
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    values = sweep_values(args.start, args.stop, args.num, args.scale)
    rows = sweep_rows(args.axis, values, args.purcell, args.detuning, args.protocols)
    header = [args.axis, "p_s"]
    if args.protocols:
        header.extend(["p1", "p2", "p3"])
    write_csv(header, rows, args.output)
    logger.info(f"Sweep over {args.axis}: {len(rows)} rows")
    return EXIT_OK


def _enumerate(config: RunConfig) -> tuple[ProtocolSummary, list[list[Any]]]:
    params = config.emitter_params()
    report: Any
    if config.protocol == "creation":
        report = run_creation(params, config.noise_params(), _wavepacket(config), wfc=config.wfc)
        rows = [[r.herald, r.probability, r.correction, r.fidelity] for r in report.results]
    elif config.protocol == "swap":
        report = run_swapping(params)
        rows = [[r.herald, r.probability, r.correction, r.fidelity] for r in report.results]
    else:
        assert config.fidelity is not None
        report = run_purification(config.fidelity, params)
        rows = [[r.herald, r.probability, r.correction, r.output_fidelity] for r in report.results]
    return report.summary(), rows


def _sample(config: RunConfig) -> tuple[ProtocolSummary, list[list[Any]]]:
    assert config.seed is not None
    spec = TrialSpec(
        protocol=config.protocol,
        params=config.emitter_params(),
        noise=config.noise_params(),
        fidelity=config.fidelity,
        sigma=config.sigma,
        bins=config.bins,
        wfc=config.wfc,
    )
    statistics = run_trials(spec, seed=config.seed, trials=config.trials, workers=config.workers)
    summary = statistics.summary()
    if config.protocol == "purify":
        assert config.fidelity is not None
        purification = PurificationStatistics(
            input_fidelity=config.fidelity,
            trials=statistics.trials,
            counts=statistics.counts,
            fidelity_sum=statistics.fidelity_sum,
        ).summary()
        summary = summary.model_copy(update={"extra": {**summary.extra, **purification.extra}})
    rows = [[r.index, r.outcome, r.fidelity] for r in statistics.records]
    return summary, rows


def _wavepacket(config: RunConfig) -> SpectralWavepacket | None:
    if not config.spectral or config.sigma is None:
        return None
    return SpectralWavepacket.gaussian(config.sigma, bins=config.bins)


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "purcell": args.purcell,
        "detuning": args.detuning,
        "noise": args.noise,
        "fidelity": args.fidelity,
        "spectral": args.spectral,
        "sigma": args.sigma,
        "bins": args.bins,
        "wfc": args.wfc,
        "enumerate": args.enumerate,
        "trials": args.trials,
        "seed": args.seed,
        "workers": args.workers,
        "output": args.output,
    }
    config = build_run_config(args.protocol, overrides, args.config)

    if config.evaluation == EvaluationMode.SAMPLE:
        summary, rows = _sample(config)
        header = ["trial", "outcome", "fidelity"]
    else:
        summary, rows = _enumerate(config)
        header = ["outcome", "probability", "correction", "fidelity"]

    if config.output:
        write_csv(header, rows, config.output)
    pairs = summary.as_pairs()
    if config.protocol == "creation":
        pairs.insert(2, ("wfc", config.wfc))
    sys.stdout.write(key_value_lines(pairs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heraldsim", description="预告式量子中继构件模拟")
    parser.add_argument("--verbose", "-v", action="store_true", help="输出 DEBUG 日志")
    subparsers = parser.add_subparsers(dest="command", help="子命令")

    # 散射系数
    coeff_parser = subparsers.add_parser("coeff", help="散射系数 r、t、loss 与 p_s")
    coeff_parser.add_argument("--purcell", type=float, required=True, help="Purcell 因子（可为 inf）")
    coeff_parser.add_argument("--detuning", type=float, default=0.0, help="失谐 Δ/γ_1D")

    # 参数扫描
    sweep_parser = subparsers.add_parser("sweep", help="p_s（及 p1、p2、p3）随参数变化的 CSV")
    sweep_parser.add_argument("axis", choices=["purcell", "detuning"], help="扫描变量")
    sweep_parser.add_argument("--start", type=float, required=True, help="起点")
    sweep_parser.add_argument("--stop", type=float, required=True, help="终点")
    sweep_parser.add_argument("--num", type=int, required=True, help="格点数")
    sweep_parser.add_argument("--scale", choices=["linear", "log"], default="linear", help="格点分布")
    sweep_parser.add_argument("--purcell", type=float, default=float("inf"), help="固定的 Purcell 因子")
    sweep_parser.add_argument("--detuning", type=float, default=0.0, help="固定的失谐")
    sweep_parser.add_argument("--protocols", action="store_true", help="附加三个协议的成功概率")
    sweep_parser.add_argument("--output", "-o", help="CSV 路径（默认标准输出）")

    # 协议运行（未给出的参数取配置文件，再取默认值）
    run_parser = subparsers.add_parser("run", help="运行协议")
    run_parser.add_argument("protocol", choices=["creation", "swap", "purify"], help="协议")
    run_parser.add_argument("--purcell", type=float, help="Purcell 因子")
    run_parser.add_argument("--detuning", type=float, help="失谐")
    run_parser.add_argument("--noise", help="集体噪声 gamma,delta")
    run_parser.add_argument("--fidelity", type=float, help="提纯输入保真度")
    run_parser.add_argument("--spectral", action="store_const", const=True, help="使用高斯频谱波包")
    run_parser.add_argument("--sigma", type=float, help="波包宽度 σ")
    run_parser.add_argument("--bins", type=int, help="频率格点数")
    run_parser.add_argument("--no-wfc", dest="wfc", action="store_const", const=False, help="关闭波形校正")
    mode = run_parser.add_mutually_exclusive_group()
    mode.add_argument("--enumerate", action="store_const", const=True, help="精确枚举")
    mode.add_argument("--trials", type=int, help="抽样试验次数（需要 --seed）")
    run_parser.add_argument("--seed", type=int, help="抽样种子")
    run_parser.add_argument("--workers", type=int, help="并行进程数")
    run_parser.add_argument("--output", "-o", help="逐结果 CSV 路径")
    run_parser.add_argument("--config", help="key=value 配置文件")

    return parser


COMMANDS = {"coeff": cmd_coeff, "sweep": cmd_sweep, "run": cmd_run}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    init_logging("DEBUG" if args.verbose else None)

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INVALID

    try:
        return COMMANDS[args.command](args)
    except (HeraldSimError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
