"""``spectral-levy`` command line.

Resolution order for every setting, later wins::

    built-in defaults < --config file < --override KEY=VALUE < --seed

A config file is either a bare model record (it has a ``kind`` key), a full
run config, or any JSON/CSV file previously written by this tool, whose
embedded config is reused.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .covariance import covariance_plugin, oracle_covariance
from .errors import NumericalGuardError, ValidationError
from .estimator import EstimateConfig, estimate
from .models import LevyModel, check_assumptions, sample_increments
from .montecarlo import ExperimentConfig, run_experiment

COMMANDS = ("simulate", "estimate", "variance", "mc", "check")

DEFAULTS: dict[str, Any] = {
    "model": None,
    "n": 1000,
    "delta": 1.0,
    "seed": 0,
    "t_grid": [0.5, 1.0, 2.0],
    "increments": None,
    "estimate": {k: v for k, v in EstimateConfig().to_dict().items() if k != "delta"},
    "variance": {"method": "plugin", "m_samples": 100000, "h": 1e-3},
    "replications": 100,
    "ci_level": 0.95,
    "workers": 1,
    "check": {"epsilon": 0.05, "u_max": 1e5, "points": 4096},
}

OUTPUTS = {
    "simulate": ("increments.csv",),
    "estimate": ("estimate.csv", "estimate.json"),
    "variance": ("covariance.csv", "covariance.json"),
    "mc": ("report.json", "replications.csv"),
    "check": ("assumptions.json",),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config, model record, or earlier output")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="seed (master seed for mc)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted key, JSON value; repeatable")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p = _Parser(prog="spectral-levy", description="Spectral estimation of Levy measures")
    p.add_argument("--version", action="version", version=f"spectral-levy {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "simulate": "draw increments",
        "estimate": "estimate N on a t-grid",
        "variance": "plug-in or oracle covariance",
        "mc": "Monte-Carlo CLT experiment",
        "check": "check model assumptions",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


# --------------------------------------------------------------------------
# config resolution


def _read_config_file(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    if path.suffix == ".csv" or text.startswith("#"):
        first = text.splitlines()[0] if text else ""
        if not first.startswith("# "):
            raise ValidationError(f"{path} carries no embedded config")
        text = first[2:]
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed config {path}: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(obj, dict):
        raise ValidationError("config must be a JSON object")
    if "version" in obj and "config" in obj:
        obj = obj["config"]
    if "kind" in obj:
        obj = {"model": obj}
    return obj


def _merge(base: dict[str, Any], upd: dict[str, Any], where: str = "") -> None:
    for k, v in upd.items():
        key = f"{where}{k}"
        if k not in base:
            raise ValidationError(f"unknown config key: {key}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k != "model":
            _merge(base[k], v, key + ".")
        else:
            base[k] = v


def _parse_override(item: str) -> tuple[list[str], Any]:
    if "=" not in item:
        raise ValidationError(f"override must be KEY=VALUE: {item!r}")
    key, raw = item.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ValidationError(f"empty override key in {item!r}")
    return path, val


def _apply_override(cfg: dict[str, Any], path: list[str], val: Any) -> None:
    # the model record is free-form here; LevyModel.from_dict validates it later
    free = path[0] == "model"
    node = cfg
    for i, p in enumerate(path[:-1]):
        if free and node.get(p) is None:
            node[p] = {}
        if p not in node:
            raise ValidationError(f"unknown config key: {'.'.join(path[:i + 1])}")
        if not isinstance(node[p], dict):
            raise ValidationError(f"config key {'.'.join(path[:i + 1])} is not a section")
        node = node[p]
    if not free and path[-1] not in node:
        raise ValidationError(f"unknown config key: {'.'.join(path)}")
    node[path[-1]] = val


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = copy.deepcopy(DEFAULTS)
    base_dir = Path(".")
    if args.config is not None:
        _merge(cfg, _read_config_file(args.config))
        base_dir = args.config.parent
    for item in args.override:
        _apply_override(cfg, *_parse_override(item))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if cfg["increments"] is not None:
        p = Path(cfg["increments"])
        cfg["increments"] = str(p if p.is_absolute() else base_dir / p)
    return cfg


def _model(cfg) -> LevyModel:
    if cfg["model"] is None:
        raise ValidationError("config has no model")
    return LevyModel.from_dict(cfg["model"])


def _int(cfg, key) -> int:
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{key} must be an integer")
    return v


def _estimate_config(cfg) -> EstimateConfig:
    d = dict(cfg["estimate"])
    d["delta"] = float(cfg["delta"])
    return EstimateConfig.from_dict(d)


def _read_increments(path: str) -> np.ndarray:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read increments {path}: {exc.strerror}") from None
    rows = [ln for ln in lines if ln and not ln.startswith("#")]
    if not rows or rows[0].strip() != "x":
        raise ValidationError("increments CSV needs a header line 'x'")
    try:
        return np.array([float(r) for r in rows[1:]])
    except ValueError:
        raise ValidationError("increments CSV has a non-numeric entry") from None


def _sample(cfg) -> np.ndarray:
    if cfg["increments"] is not None:
        return _read_increments(cfg["increments"])
    return sample_increments(_model(cfg), _int(cfg, "n"), float(cfg["delta"]), _int(cfg, "seed"))


# --------------------------------------------------------------------------
# commands


def _header(command: str, cfg) -> dict[str, Any]:
    return {"version": __version__, "command": command, "config": cfg}


def _csv(command: str, cfg, body: str) -> str:
    return "# " + json.dumps(_header(command, cfg), sort_keys=True, separators=(",", ":")) + "\n" + body


def _json(command: str, cfg, result: dict[str, Any]) -> str:
    return json.dumps({**_header(command, cfg), "result": result}, indent=2, sort_keys=True) + "\n"


def cmd_simulate(cfg):
    x = sample_increments(_model(cfg), _int(cfg, "n"), float(cfg["delta"]), _int(cfg, "seed"))
    body = "x\n" + "".join(repr(float(v)) + "\n" for v in x)
    return {"increments.csv": _csv("simulate", cfg, body)}


def cmd_estimate(cfg):
    res = estimate(_sample(cfg), _estimate_config(cfg), cfg["t_grid"])
    result = {"t_grid": res.t_grid.tolist(), "n_hat": res.n_hat.tolist(), **res.sidecar()}
    return {"estimate.csv": _csv("estimate", cfg, res.to_csv()),
            "estimate.json": _json("estimate", cfg, result)}


def cmd_variance(cfg):
    v = cfg["variance"]
    est = _estimate_config(cfg)
    if v.get("method") == "plugin":
        cov = covariance_plugin(_sample(cfg), est, cfg["t_grid"])
    elif v.get("method") == "oracle":
        cov = oracle_covariance(_model(cfg), est, cfg["t_grid"], int(v["m_samples"]),
                                float(v["h"]), seed=_int(cfg, "seed"))
    else:
        raise ValidationError("variance.method must be 'plugin' or 'oracle'")
    return {"covariance.csv": _csv("variance", cfg, cov.to_csv()),
            "covariance.json": _json("variance", cfg, cov.to_dict())}


def cmd_mc(cfg):
    exp = ExperimentConfig(
        model=_model(cfg), n=_int(cfg, "n"), delta=float(cfg["delta"]),
        replications=_int(cfg, "replications"), t_grid=cfg["t_grid"],
        estimate_config=_estimate_config(cfg), master_seed=_int(cfg, "seed"),
        ci_level=float(cfg["ci_level"]))
    rep = run_experiment(exp, workers=max(1, _int(cfg, "workers")))
    return {"report.json": _json("mc", cfg, rep.to_dict()),
            "replications.csv": _csv("mc", cfg, rep.to_csv())}


def cmd_check(cfg):
    c = cfg["check"]
    rep = check_assumptions(_model(cfg), float(cfg["delta"]), float(c["epsilon"]),
                            float(c["u_max"]), int(c["points"]))
    return {"assumptions.json": _json("check", cfg, rep.to_dict())}


HANDLERS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "variance": cmd_variance,
            "mc": cmd_mc, "check": cmd_check}


def _write(out: Path, files: dict[str, str], force: bool) -> None:
    if out.exists() and not out.is_dir():
        raise ValidationError(f"output path {out} is not a directory")
    if not force:
        clash = [name for name in files if (out / name).exists()]
        if clash:
            raise ValidationError(f"refusing to overwrite {', '.join(clash)} in {out} (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def _diagnose(exc: Exception, code: int) -> None:
    line = json.dumps({"error": type(exc).__name__, "exit_code": code, "message": str(exc)})
    print(line, file=sys.stderr)


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ValidationError(f"a command is required: one of {', '.join(COMMANDS)}")
        cfg = resolve_config(args)
        # fail on existing files before doing any work
        if not args.force:
            clash = [n for n in OUTPUTS[args.command] if (args.out / n).exists()]
            if clash:
                raise ValidationError(
                    f"refusing to overwrite {', '.join(clash)} in {args.out} (use --force)")
        files = HANDLERS[args.command](cfg)
        _write(args.out, files, args.force)
    except NumericalGuardError as exc:
        _diagnose(exc, 2)
        return 2
    except (ValueError, TypeError, KeyError) as exc:
        # ValidationError, or a config value of the wrong type
        _diagnose(exc, 1)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
