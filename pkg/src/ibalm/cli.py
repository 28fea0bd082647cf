"""Command-line interface: enhance, edge, bench, metrics.

Every flag has a config-file equivalent (``--config file.json`` holds the
same keys with underscores); explicit flags win on conflict, and the
effective configuration is echoed into trace files as a leading ``#``
comment.  Exit codes: 0 success, 1 I/O failure, 2 configuration/validation
failure, 3 solver divergence or descent violation.  ``IBALM_LOG`` set to
``error``, ``info``, or ``debug`` controls verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bregman import (
    DescentViolationError,
    IterateTrace,
    SolverParams,
    SubproblemError,
    ama_solve,
    ibalm_solve,
)
from .grid import classical_edge
from .imgio import FormatError, load_edge_map, load_image, save_edge_map, save_image
from .metrics import compare
from .retinex import (
    IterateState,
    RetinexConfig,
    build_problem,
    enhance_color,
    split_color,
    to_log_domain,
)

log = logging.getLogger("ibalm")

_CONFIG_KEYS = (
    "input", "output", "edge", "edge_file", "alpha", "beta", "epsilon",
    "a1", "a2", "b1", "b2", "max_iters", "tol", "trace", "color",
    "compose", "gamma", "threshold",
)


@dataclass
class RunConfig:
    """Effective run configuration after merging defaults, file, and flags."""

    input: str | None = None
    output: str | None = None
    edge: str = "classical"
    edge_file: str | None = None
    alpha: float = 20.0
    beta: float = 1.0
    epsilon: float = 0.1
    a1: float | None = None
    a2: float | None = None
    b1: float | None = None
    b2: float | None = None
    max_iters: int = 200
    tol: float = 1e-5
    trace: str | None = None
    color: str = "hsv"
    compose: str = "gamma"
    gamma: float = 2.2
    threshold: float = 0.01

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        cfg = cls()
        config_path = getattr(args, "config", None)
        if config_path:
            try:
                loaded = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as err:
                raise ValueError(f"cannot read config file {config_path}: {err}") from err
            if not isinstance(loaded, dict):
                raise ValueError("config file must hold a JSON object")
            for key, value in loaded.items():
                if key not in _CONFIG_KEYS:
                    raise ValueError(f"unknown config key {key!r}")
                setattr(cfg, key, value)
        for key in _CONFIG_KEYS:
            value = getattr(args, key, None)
            if value is not None:
                setattr(cfg, key, value)
        if cfg.edge not in ("classical",):
            raise ValueError(f"unknown edge source {cfg.edge!r}")
        return cfg

    def echo(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def retinex_config(self) -> RetinexConfig:
        return RetinexConfig(
            alpha=float(self.alpha),
            beta=float(self.beta),
            compose_mode=self.compose,
            display_gamma=float(self.gamma),
            color_mode=self.color,
        )

    def solver_params(self) -> SolverParams:
        eps = float(self.epsilon)
        alpha_k = None
        beta_k = None
        if self.a1 is not None or self.a2 is not None:
            bar = max(0.0, 0.5 - eps)
            fallback = min(0.2, 0.99 * bar)
            alpha_k = (
                float(self.a1) if self.a1 is not None else fallback,
                float(self.a2) if self.a2 is not None else fallback,
            )
        if self.b1 is not None or self.b2 is not None:
            fallback = min(0.5, 1.0 - eps)
            beta_k = (
                float(self.b1) if self.b1 is not None else fallback,
                float(self.b2) if self.b2 is not None else fallback,
            )
        return SolverParams(
            lambda_plus=(float(self.beta), float(self.beta)),
            epsilon=eps,
            alpha_k=alpha_k,
            beta_k=beta_k,
            max_iters=int(self.max_iters),
            step_tol=float(self.tol),
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ibalm",
        description="Edge-guided Retinex low-light enhancement with a "
                    "descent-certified inertial solver",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with flag defaults")
        p.add_argument("--input", help="input image (PNG/PGM/PPM)")
        p.add_argument("--output", help="output image path")
        p.add_argument("--edge", choices=["classical"], help="edge prior source")
        p.add_argument("--edge-file", dest="edge_file", help="EGMP edge map path")
        p.add_argument("--alpha", type=float, help="edge-fidelity weight")
        p.add_argument("--beta", type=float, help="data-fidelity weight")
        p.add_argument("--epsilon", type=float, help="descent slack in (0, 1)")
        p.add_argument("--a1", type=float, help="block-1 inertial coefficient")
        p.add_argument("--a2", type=float, help="block-2 inertial coefficient")
        p.add_argument("--b1", type=float, help="block-1 gradient extrapolation")
        p.add_argument("--b2", type=float, help="block-2 gradient extrapolation")
        p.add_argument("--max-iters", dest="max_iters", type=int, help="outer iteration cap")
        p.add_argument("--tol", type=float, help="relative step-norm stopping tolerance")
        p.add_argument("--trace", help="write per-iteration CSV trace(s) here")
        p.add_argument("--color", choices=["hsv", "rgb"], help="color handling")
        p.add_argument("--compose", choices=["reflectance", "gamma"], help="output composition")
        p.add_argument("--gamma", type=float, help="display gamma for composition")
        p.add_argument("--threshold", type=float, help="bench energy threshold fraction")

    add_common(sub.add_parser("enhance", help="enhance a low-light image"))
    add_common(sub.add_parser("edge", help="extract a classical edge map to EGMP"))
    add_common(sub.add_parser("bench", help="compare the inertial solver with its zero-inertia baseline"))
    metrics_p = sub.add_parser("metrics", help="PSNR/SSIM between two images")
    metrics_p.add_argument("images", nargs=2, metavar=("TEST", "REFERENCE"))
    return parser


def _work_channel(S: np.ndarray) -> np.ndarray:
    if S.ndim == 2:
        return S
    value, _ = split_color(S)
    return value


def _load_edge_for(cfg: RunConfig, shape: tuple[int, int]) -> np.ndarray | None:
    if cfg.edge_file is None:
        return None
    edge = load_edge_map(cfg.edge_file)
    if edge.shape != shape:
        raise ValueError(
            f"edge map shape {edge.shape} does not match work channel {shape}"
        )
    return edge


def _trace_paths(base: str, count: int) -> list[Path]:
    path = Path(base)
    if count == 1:
        return [path]
    return [path.with_name(f"{path.stem}.c{i}{path.suffix}") for i in range(count)]


def cmd_enhance(cfg: RunConfig) -> int:
    if cfg.input is None or cfg.output is None:
        raise ValueError("enhance requires --input and --output")
    rcfg = cfg.retinex_config()
    params = cfg.solver_params()
    S = load_image(cfg.input)
    edge = _load_edge_for(cfg, S.shape[:2])
    out, traces = enhance_color(S, rcfg, params, edge_map=edge)
    save_image(out, cfg.output)
    log.info("enhance: wrote %s after %s outer iterations",
             cfg.output, [len(t) for t in traces])
    if cfg.trace is not None:
        for trace, path in zip(traces, _trace_paths(cfg.trace, len(traces))):
            trace.write_csv(path, header_comment=cfg.echo(), deterministic_elapsed=True)
    return 0


def cmd_edge(cfg: RunConfig) -> int:
    if cfg.input is None or cfg.edge_file is None:
        raise ValueError("edge requires --input and --edge-file (EGMP destination)")
    S = load_image(cfg.input)
    # cast through the storage precision so the preview matches the file
    edge = classical_edge(_work_channel(S)).astype(np.float32).astype(float)
    save_edge_map(edge, cfg.edge_file)
    log.info("edge: wrote %s", cfg.edge_file)
    if cfg.output is not None:
        peak = float(np.abs(edge).max())
        ratio = edge / peak if peak > 0 else np.zeros_like(edge)
        save_image(0.5 * (1.0 + ratio), cfg.output)
        log.info("edge: wrote preview %s", cfg.output)
    return 0


def _iters_to_threshold(trace: IterateTrace, threshold: float) -> int:
    phis = trace.phis(include_initial=True)
    hits = np.nonzero(phis <= threshold)[0]
    return int(hits[0]) if hits.size else len(phis) - 1


def cmd_bench(cfg: RunConfig) -> int:
    if cfg.input is None:
        raise ValueError("bench requires --input")
    rcfg = cfg.retinex_config()
    params = cfg.solver_params()
    S = _work_channel(load_image(cfg.input))
    edge = _load_edge_for(cfg, S.shape)
    g = classical_edge(S) if edge is None else edge
    s = to_log_domain(S, rcfg.log_clamp)
    init = IterateState.from_init(s, np.zeros_like(s))
    # fresh problem per run: the TV-prox dual cache is single-solve state
    problem, kernels = build_problem(s, g, rcfg)
    _, trace_inertial = ibalm_solve(problem, params, kernels, init)
    problem, kernels = build_problem(s, g, rcfg)
    _, trace_baseline = ama_solve(problem, params, kernels, init)
    emin = min(trace_inertial.phis().min(), trace_baseline.phis().min())
    threshold = emin + float(cfg.threshold) * abs(emin)
    k_inertial = _iters_to_threshold(trace_inertial, threshold)
    k_baseline = _iters_to_threshold(trace_baseline, threshold)
    if cfg.trace is not None:
        base = Path(cfg.trace)
        for tag, tr in (("ibalm", trace_inertial), ("ama", trace_baseline)):
            tr.write_csv(base.with_name(f"{base.stem}.{tag}{base.suffix}"),
                         header_comment=cfg.echo(), deterministic_elapsed=True)
    print(f"{cfg.input}: ibalm {k_inertial} iters, ama {k_baseline} iters "
          f"to energy <= {threshold:.6e}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    test = load_image(args.images[0])
    reference = load_image(args.images[1])
    report = compare(test, reference)
    for line in report.lines():
        print(line)
    return 0


def main(argv: list[str] | None = None) -> int:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("IBALM_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "metrics":
            return cmd_metrics(args)
        cfg = RunConfig.resolve(args)
        if args.command == "enhance":
            return cmd_enhance(cfg)
        if args.command == "edge":
            return cmd_edge(cfg)
        if args.command == "bench":
            return cmd_bench(cfg)
        raise ValueError(f"unknown command {args.command!r}")
    except (FileNotFoundError, FormatError, OSError) as err:
        print(f"ibalm: i/o error: {err}", file=sys.stderr)
        return 1
    except (DescentViolationError, SubproblemError) as err:
        print(f"ibalm: solver error: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"ibalm: invalid configuration: {err}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
