"""Command-line entry point: ``u1circuit <mode> [--config F] [--preset P] ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import config as cfgmod
from .runner import EXIT_CONFIG, run


def _deep_merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="u1circuit",
        description="Simulate disordered U(1)-symmetric Floquet circuits.",
    )
    parser.add_argument("--list-presets", action="store_true", help="print the built-in presets and exit")
    sub = parser.add_subparsers(dest="mode")
    for mode in cfgmod.MODES:
        p = sub.add_parser(mode, help=f"run in {mode} mode")
        p.add_argument("--config", metavar="PATH", help="TOML run configuration")
        p.add_argument("--preset", metavar="NAME", help="start from a built-in configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, metavar="INT", help="master seed (overrides master_seed)")
        p.add_argument("--threads", type=int, metavar="INT", default=None,
                       help="worker processes (default: all cores); results do not depend on it")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. --set n_trajectories=10 --set fit.p_window=[5,50]")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> cfgmod.RunConfig:
    base = cfgmod.get_preset(args.preset) if args.preset else None
    raw: dict = {}
    if args.config:
        raw = cfgmod.load(args.config).to_dict() if base is None else _load_raw(args.config)
    for text in args.set:
        raw = _deep_merge(raw, cfgmod.parse_override(text))
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.seed is not None:
        raw["master_seed"] = args.seed
    cfg = cfgmod.from_dict(raw, base)
    if "mode" in raw and raw["mode"] != args.mode:
        raise cfgmod.ConfigError("mode", f"config asks for {raw['mode']!r} but the command is {args.mode!r}")
    if base is not None and base.mode != args.mode and {base.mode, args.mode} != {"transport", "sweep"}:
        raise cfgmod.ConfigError("preset", f"preset {args.preset!r} is a {base.mode} run, not {args.mode}")
    cfg.mode = args.mode
    return cfgmod.validate(cfg)


def _load_raw(path) -> dict:
    cfgmod.load(path)  # validates on its own first
    with open(path, "rb") as fh:
        return cfgmod.tomllib.load(fh)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        for name, cfg in sorted(cfgmod.presets().items()):
            print(f"{name:18s} {cfg.mode:10s} N={cfg.N} grid points={len(cfg.grid())}")
        return 0
    if args.mode is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("config error: --threads: must be positive", file=sys.stderr)
        return EXIT_CONFIG
    status = run(cfg, workers=args.threads)
    print(f"wrote {cfg.output_dir}/manifest.json and summary.json (status {status})")
    return status


if __name__ == "__main__":
    sys.exit(main())
