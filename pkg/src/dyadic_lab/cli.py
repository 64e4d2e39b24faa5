"""Command-line driver.

Exit codes: 0 when every check passes, 1 on a budget or tolerance failure,
2 on an invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import experiments
from .grid import DyadicError, GridSpec

COMMANDS = ("identity-check", "wilson-check", "inequality-sweep", "scaling-study")
IDENTITY_COLUMNS = ("trial", "family", "param", "a2", "lhs", "residual", "split_residual", "mg_residual",
                    "adjoint_residual")
WILSON_COLUMNS = IDENTITY_COLUMNS[:7] + ("prop_residual", "product_residual") + IDENTITY_COLUMNS[7:]
SWEEP_COLUMNS = ("family", "param", "depth", "a2", "name", "sup", "budget", "bound", "pass")


class ConfigError(DyadicError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    d: int = 1
    depths: list = field(default_factory=lambda: [5])
    R: int | None = None
    family: str | None = None
    params: list | None = None
    trials: int = 100
    seed: int = 0
    budgets: dict = field(default_factory=lambda: dict(experiments.DEFAULT_BUDGETS))
    out: str | None = None
    format: str = "csv"
    timings: bool = False

    @property
    def M(self) -> int:
        return self.depths[0]

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if self.d < 1:
            raise ConfigError("dimension must be at least 1")
        if not self.depths or min(self.depths) < 1:
            raise ConfigError("depths must be positive")
        if self.command != "inequality-sweep" and len(self.depths) != 1:
            raise ConfigError(f"{self.command} takes a single depth")
        if self.R is not None and self.R < max(self.depths) + 1:
            raise ConfigError(f"resolution R={self.R} must be at least depth + 1 = {max(self.depths) + 1}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.family is not None and self.family not in experiments.FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        for key, val in self.budgets.items():
            if val is not None and not (isinstance(val, (int, float)) and val > 0):
                raise ConfigError(f"budget {key!r} must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.command == "identity-check" and self.d != 1:
            raise ConfigError("identity-check runs the one-dimensional suite; use wilson-check for d > 1")

    def grid(self) -> GridSpec:
        return GridSpec(self.d, self.M, self.M + 2 if self.R is None else self.R)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyadic-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS, help="experiment to run (or use --cmd)")
    p.add_argument("--cmd", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with any of the options below; flags override it")
    p.add_argument("--dim", type=int)
    p.add_argument("--depth", help="depth M; inequality-sweep accepts a comma list")
    p.add_argument("--resolution", type=int, help="finest level R (default M + 2)")
    p.add_argument("--family", choices=experiments.FAMILIES)
    p.add_argument("--params", help="comma-separated weight parameters")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget-file", help="JSON object overriding the default budgets")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--timings", action="store_true", help="fill the runtime column (breaks byte-identity)")
    return p


def _ints(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    if isinstance(text, int):
        return [text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def load_config(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    flags = {
        "cmd": args.cmd or args.command, "dim": args.dim, "depth": args.depth,
        "resolution": args.resolution, "family": args.family, "params": args.params,
        "trials": args.trials, "seed": args.seed, "out": args.out, "format": args.format,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.timings:
        data["timings"] = True
    budgets = dict(experiments.DEFAULT_BUDGETS)
    budget_file = args.budget_file or data.get("budget_file")
    if budget_file:
        try:
            budgets.update(json.loads(Path(budget_file).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read budgets {budget_file}: {exc}") from exc
    budgets.update(data.get("budgets", {}))
    if "cmd" not in data:
        raise ConfigError("no command given")
    try:
        cfg = ExperimentConfig(
            command=data["cmd"], d=int(data.get("dim", 1)), depths=_ints(data.get("depth", 5)),
            R=None if data.get("resolution") is None else int(data["resolution"]),
            family=data.get("family"),
            params=None if data.get("params") is None else _floats(data["params"]),
            trials=int(data.get("trials", 100)), seed=int(data.get("seed", 0)), budgets=budgets,
            out=data.get("out"), format=data.get("format", "csv"), timings=bool(data.get("timings", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    cfg.validate()
    return cfg


# -- output ---------------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.17g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


def render(rows, columns, fmt: str, footer: dict | None = None) -> str:
    """CSV (header, rows, then a ``# {json}`` footer line) or JSON ``{"rows", "footer"}``."""
    rows = [_jsonable(r) for r in rows]
    footer = _jsonable(footer or {})
    if fmt == "json":
        return json.dumps({"rows": [{c: r.get(c) for c in columns} for r in rows], "footer": footer},
                          indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    if footer:
        buf.write("# " + json.dumps(footer, sort_keys=True) + "\n")
    return buf.getvalue()


def emit(rows, columns, fmt: str, path: str | None, footer: dict | None = None):
    text = render(rows, columns, fmt, footer)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- dispatch ---------------------------------------------------------------------------


def _families(cfg: ExperimentConfig) -> tuple:
    return (cfg.family,) if cfg.family else experiments.FAMILIES


def _params(cfg: ExperimentConfig) -> dict:
    if cfg.params is None:
        return {}
    return {fam: cfg.params for fam in _families(cfg)}


def run(cfg: ExperimentConfig) -> tuple:
    """Run one experiment; returns ``(outcome, columns)``."""
    if cfg.command in ("identity-check", "wilson-check"):
        grid = cfg.grid()
        out = experiments.identity_check(grid, cfg.trials, cfg.seed, _families(cfg), _params(cfg),
                                         wilson_mode=cfg.command == "wilson-check",
                                         tol=cfg.budgets["identity"])
        cols = WILSON_COLUMNS if cfg.command == "wilson-check" else IDENTITY_COLUMNS
        return out, cols
    if cfg.command == "inequality-sweep":
        out = experiments.inequality_sweep(cfg.d, cfg.depths, _families(cfg), _params(cfg), cfg.budgets, cfg.R)
        return out, SWEEP_COLUMNS
    grid = cfg.grid()
    out = experiments.scaling_study(cfg.d, grid.M, grid.R, cfg.family or "recursive", cfg.params, cfg.seed,
                                    cfg.budgets, cfg.timings)
    return out, experiments.SCALING_COLUMNS


def main(argv=None) -> int:
    try:
        cfg = load_config(argv)
    except DyadicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outcome, cols = run(cfg)
    try:
        emit(outcome.rows, cols, cfg.format, cfg.out, outcome.footer)
    except OSError as exc:
        print(f"error: cannot write {cfg.out}: {exc}", file=sys.stderr)
        return 2
    if not outcome.passed:
        for line in outcome.failures:
            print(f"FAIL {line}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
