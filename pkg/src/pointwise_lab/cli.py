"""``pointwise-lab <subcommand> [--config FILE] [--seed N] [--out DIR] [key=value ...]``.

The config file is JSON: either a flat object of keys for the chosen
subcommand or an object with one section per subcommand name. Positional
``key=value`` overrides are parsed as JSON when possible, else taken as
strings. Every run writes ``config.json`` (the resolved config) and
``meta.json`` (version, timing, data digests, summary) next to its outputs.

On failure a single JSON line ``{"error": ..., "message": ...}`` goes to
stderr and the exit code is nonzero (2 for bad usage or config, 1 otherwise).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import SUBCOMMANDS

EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


def parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_config(name: str, config_file=None, overrides=(), seed=None):
    """Defaults, then the config file, then ``--seed``, then key=value overrides.

    ``--seed`` is ignored by subcommands that have nothing random in them.
    """
    cls = SUBCOMMANDS[name][0]
    known = {f.name for f in dataclasses.fields(cls)}
    values: dict = {}
    if config_file is not None:
        try:
            loaded = json.loads(Path(config_file).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_file}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{config_file}: top level must be an object")
        if name in loaded and isinstance(loaded[name], dict):
            loaded = loaded[name]
        elif any(k in SUBCOMMANDS for k in loaded):
            loaded = {}
        values.update(loaded)
    if seed is not None and "seed" in known:
        values["seed"] = seed
    for item in overrides:
        k, v = parse_override(item)
        values[k] = v
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {unknown}; expected some of {sorted(known)}")
    return cls(**values)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run(name: str, cfg, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    resolved = _jsonable(dataclasses.asdict(cfg))
    (out / "config.json").write_text(json.dumps({"subcommand": name, **resolved},
                                                indent=2, sort_keys=True) + "\n")
    started = time.time()
    t0 = time.perf_counter()
    summary = _jsonable(SUBCOMMANDS[name][1](cfg, out))
    meta = {
        "tool": "pointwise-lab",
        "version": __version__,
        "subcommand": name,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "started_unix": started,
        "wall_seconds": time.perf_counter() - t0,
        "data_digests": summary.pop("data_digests", {}),
        "summary": summary,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointwise-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, (cls, _) in SUBCOMMANDS.items():
        keys = ", ".join(f.name for f in dataclasses.fields(cls))
        p = sub.add_parser(name, help=f"keys: {keys}", description=f"config keys: {keys}")
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output directory (default runs/<subcommand>)")
        p.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def _fail(kind: str, exc: BaseException, code: int) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    for attr in ("field", "index", "filename"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    print(json.dumps(record, default=str), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args.subcommand, args.config, args.overrides, args.seed)
    except (ConfigError, TypeError, OSError) as exc:
        return _fail("config", exc, EXIT_USAGE)
    out = args.out or Path("runs") / args.subcommand
    try:
        meta = run(args.subcommand, cfg, out)
    except Exception as exc:  # reported as one machine-readable line
        return _fail("runtime", exc, EXIT_RUNTIME)
    print(json.dumps({"out": str(out), "wall_seconds": round(meta["wall_seconds"], 3),
                      "summary": meta["summary"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
