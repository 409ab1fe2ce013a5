"""Command-line front end.

Subcommands: ``denoise``, ``add-noise``, ``compare``, ``sweep``, ``info``.
Exit codes partition the failure classes: 2 bad arguments, 3 image I/O,
4 pipeline failure.  Expected failures print a message to stderr, never a
traceback.  A ``--config`` JSON file may supply any long-option value;
explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import accel
from .errors import ImageFormatError
from .image_core import NoiseSpec, add_uniform_noise, load_image, reconstruction_error, save_image
from .pipeline import (
    BACKENDS,
    METHODS,
    DenoiseConfig,
    MAX_VERTICES,
    denoise,
    projected_memory_bytes,
    run_sweep,
)

EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_PIPELINE = 4


class _OptionError(Exception):
    """Bad or missing option values (maps to exit code 2)."""


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ggdenoise",
        description="Patch-graph spectral image denoising (geodesic Gramian and Laplacian baselines).",
    )
    sub = parser.add_subparsers(dest="command")

    den = sub.add_parser("denoise", help="denoise one image")
    den.add_argument("--in", dest="input", metavar="PATH")
    den.add_argument("--out", dest="output", metavar="PATH")
    den.add_argument("--method", choices=METHODS)
    den.add_argument("--rho", type=int)
    den.add_argument("--delta", type=int)
    den.add_argument("--L", dest="L", type=int)
    den.add_argument("--beta", type=float)
    den.add_argument("--gamma", type=float)
    den.add_argument("--backend", choices=BACKENDS)
    den.add_argument("--truth", metavar="PATH")
    den.add_argument("--threads", type=int)
    den.add_argument("--override-memory-guard", action="store_true")
    den.add_argument("--config", metavar="JSON")
    den.set_defaults(handler=cmd_denoise)

    noise = sub.add_parser("add-noise", help="inject additive uniform noise")
    noise.add_argument("--in", dest="input", metavar="PATH")
    noise.add_argument("--out", dest="output", metavar="PATH")
    noise.add_argument("--epsilon", type=float)
    noise.add_argument("--seed", type=int)
    noise.add_argument("--config", metavar="JSON")
    noise.set_defaults(handler=cmd_add_noise)

    cmp_parser = sub.add_parser("compare", help="print the error metric between two images")
    cmp_parser.add_argument("--a", metavar="PATH")
    cmp_parser.add_argument("--b", metavar="PATH")
    cmp_parser.add_argument("--config", metavar="JSON")
    cmp_parser.set_defaults(handler=cmd_compare)

    sweep = sub.add_parser("sweep", help="run a parameter grid and write a CSV report")
    sweep.add_argument("--in", dest="input", metavar="PATH")
    sweep.add_argument("--truth", metavar="PATH")
    sweep.add_argument("--epsilons", metavar="LIST")
    sweep.add_argument("--rhos", metavar="LIST")
    sweep.add_argument("--deltas", metavar="LIST")
    sweep.add_argument("--Ls", dest="Ls", metavar="LIST")
    sweep.add_argument("--methods", metavar="LIST")
    sweep.add_argument("--seeds", metavar="LIST")
    sweep.add_argument("--out", dest="output", metavar="PATH")
    sweep.add_argument("--beta", type=float)
    sweep.add_argument("--gamma", type=float)
    sweep.add_argument("--backend", choices=BACKENDS)
    sweep.add_argument("--threads", type=int)
    sweep.add_argument("--checkpoint-dir", metavar="DIR")
    sweep.add_argument("--override-memory-guard", action="store_true")
    sweep.add_argument("--config", metavar="JSON")
    sweep.set_defaults(handler=cmd_sweep)

    info = sub.add_parser("info", help="projected memory footprint, before any allocation")
    info.add_argument("--n", type=int)
    info.add_argument("--rho", type=int)
    info.add_argument("--delta", type=int)
    info.add_argument("--L", dest="L", type=int)
    info.add_argument("--config", metavar="JSON")
    info.set_defaults(handler=cmd_info)

    return parser


def _merge_config(ns: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    provided = {
        key: value
        for key, value in vars(ns).items()
        if key not in ("handler", "command", "config")
        and value is not None
        and value is not False
    }
    merged = dict(defaults)
    config_path = getattr(ns, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise _OptionError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise _OptionError(f"malformed config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise _OptionError("config file must hold a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise _OptionError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    merged.update(provided)
    return merged


def _require(options: dict, *keys: str) -> None:
    missing = [key for key in keys if options.get(key) is None]
    if missing:
        raise _OptionError(f"missing required options: {', '.join('--' + k for k in missing)}")


def _parse_list(raw, kind, name: str) -> list:
    if raw is None:
        raise _OptionError(f"missing required options: --{name}")
    if isinstance(raw, (list, tuple)):
        tokens = [str(tok) for tok in raw]
    else:
        tokens = str(raw).replace(",", " ").split()
    try:
        values = [kind(tok) for tok in tokens]
    except ValueError as exc:
        raise _OptionError(f"--{name}: {exc}") from exc
    if not values:
        raise _OptionError(f"--{name}: empty grid list")
    return values


def _load(path):
    return load_image(path)


def cmd_denoise(ns: argparse.Namespace) -> int:
    defaults = {
        "input": None,
        "output": None,
        "method": None,
        "rho": None,
        "delta": None,
        "L": None,
        "beta": 3.0,
        "gamma": 5.0,
        "backend": "dijkstra",
        "truth": None,
        "threads": 0,
        "override_memory_guard": False,
    }
    try:
        opt = _merge_config(ns, defaults)
        _require(opt, "input", "output", "method", "rho", "delta", "L")
        config = DenoiseConfig(
            method=opt["method"],
            rho=int(opt["rho"]),
            delta=int(opt["delta"]),
            L=int(opt["L"]),
            beta=float(opt["beta"]),
            gamma=float(opt["gamma"]),
            aps_backend=opt["backend"],
        )
        config.validate()
        accel.set_threads(int(opt["threads"]))
    except (_OptionError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS

    try:
        image = _load(opt["input"])
        truth = _load(opt["truth"]) if opt["truth"] else None
    except ImageFormatError as exc:
        _fail(str(exc))
        return EXIT_IO

    try:
        config.validate(image.n)
        result = denoise(
            image, config, override_memory_guard=bool(opt["override_memory_guard"])
        )
    except Exception as exc:  # noqa: BLE001 - expected failures exit 4
        _fail(str(exc))
        return EXIT_PIPELINE

    try:
        save_image(result, opt["output"])
    except ImageFormatError as exc:
        _fail(str(exc))
        return EXIT_IO

    if truth is not None:
        print(f"delta={reconstruction_error(truth, result):.10g}")
    return EXIT_OK


def cmd_add_noise(ns: argparse.Namespace) -> int:
    defaults = {"input": None, "output": None, "epsilon": None, "seed": 0}
    try:
        opt = _merge_config(ns, defaults)
        _require(opt, "input", "output", "epsilon")
        spec = NoiseSpec(epsilon=float(opt["epsilon"]), seed=int(opt["seed"]))
    except (_OptionError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS
    try:
        image = _load(opt["input"])
        save_image(add_uniform_noise(image, spec), opt["output"])
    except ImageFormatError as exc:
        _fail(str(exc))
        return EXIT_IO
    return EXIT_OK


def cmd_compare(ns: argparse.Namespace) -> int:
    defaults = {"a": None, "b": None}
    try:
        opt = _merge_config(ns, defaults)
        _require(opt, "a", "b")
    except _OptionError as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS
    try:
        first = _load(opt["a"])
        second = _load(opt["b"])
    except ImageFormatError as exc:
        _fail(str(exc))
        return EXIT_IO
    try:
        print(f"delta={reconstruction_error(first, second):.10g}")
    except ValueError as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS
    return EXIT_OK


def cmd_sweep(ns: argparse.Namespace) -> int:
    defaults = {
        "input": None,
        "truth": None,
        "epsilons": None,
        "rhos": None,
        "deltas": None,
        "Ls": None,
        "methods": "ggd",
        "seeds": "0",
        "output": None,
        "beta": 3.0,
        "gamma": 5.0,
        "backend": "dijkstra",
        "threads": 0,
        "checkpoint_dir": None,
        "override_memory_guard": False,
    }
    try:
        opt = _merge_config(ns, defaults)
        _require(opt, "input", "output")
        epsilons = _parse_list(opt["epsilons"], float, "epsilons")
        rhos = _parse_list(opt["rhos"], int, "rhos")
        deltas = _parse_list(opt["deltas"], int, "deltas")
        levels = _parse_list(opt["Ls"], int, "Ls")
        methods = _parse_list(opt["methods"], str, "methods")
        seeds = _parse_list(opt["seeds"], int, "seeds")
        threads = int(opt["threads"])
        workers = threads if threads > 0 else max(1, min(os.cpu_count() or 1, 4))
    except _OptionError as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS

    try:
        image = _load(opt["input"])
        # --truth overrides the reference the metric compares against;
        # by default the clean input is its own reference.
        truth = _load(opt["truth"]) if opt["truth"] else None
    except ImageFormatError as exc:
        _fail(str(exc))
        return EXIT_IO

    try:
        report = run_sweep(
            image,
            reference=truth,
            epsilons=epsilons,
            rhos=rhos,
            deltas=deltas,
            Ls=levels,
            methods=methods,
            seeds=seeds,
            beta=float(opt["beta"]),
            gamma=float(opt["gamma"]),
            backend=opt["backend"],
            workers=workers,
            checkpoint_dir=opt["checkpoint_dir"],
            override_memory_guard=bool(opt["override_memory_guard"]),
        )
    except ValueError as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS
    except Exception as exc:  # noqa: BLE001
        _fail(str(exc))
        return EXIT_PIPELINE

    try:
        report.to_csv(opt["output"])
    except OSError as exc:
        _fail(f"cannot write {opt['output']}: {exc}")
        return EXIT_IO

    failures = report.failures()
    if failures:
        print(f"warning: {len(failures)} of {len(report.rows)} rows failed", file=sys.stderr)
    best = report.best()
    if best is not None:
        print(
            "best: method={0} epsilon={1:g} seed={2} rho={3} delta={4} L={5} "
            "delta_output={6:.6g}".format(
                best.method,
                best.epsilon,
                best.seed,
                best.rho,
                best.delta,
                best.L,
                best.delta_output,
            )
        )
    return EXIT_OK


def cmd_info(ns: argparse.Namespace) -> int:
    defaults = {"n": None, "rho": 5, "delta": 10, "L": 15}
    try:
        opt = _merge_config(ns, defaults)
        _require(opt, "n")
        n = int(opt["n"])
        if n < 1:
            raise _OptionError("--n must be positive")
    except _OptionError as exc:
        _fail(str(exc))
        return EXIT_BAD_ARGS
    footprint = projected_memory_bytes(n, int(opt["rho"]), int(opt["delta"]), int(opt["L"]))
    print(f"image side: {n} ({footprint['vertices']} patch vertices)")
    for key in ("geodesic_matrix", "gramian_matrix", "patches", "graph_edges", "basis"):
        print(f"{key}: {_human(footprint[key])}")
    print(f"peak estimate: {_human(footprint['peak_estimate'])}")
    if footprint["vertices"] > MAX_VERTICES:
        print(
            f"note: exceeds the {MAX_VERTICES}-vertex guardrail; "
            "runs require --override-memory-guard"
        )
    print(f"kernel backend: {accel.BACKEND}")
    return EXIT_OK


def _human(num_bytes: int) -> str:
    value = float(num_bytes)
    for unit in ("B", "KB", "MB", "GB"):
        if value < 1024.0 or unit == "GB":
            return f"{value:.1f} {unit}"
        value /= 1024.0
    return f"{value:.1f} GB"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    if getattr(ns, "handler", None) is None:
        parser.print_help(sys.stderr)
        return EXIT_BAD_ARGS
    return ns.handler(ns)


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
