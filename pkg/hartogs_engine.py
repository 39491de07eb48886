#!/usr/bin/env python3
"""
Hartogs Engine - command-line front end for the proper-map engine

    hartogs-engine exists    --src DESC --dst DESC
    hartogs-engine construct --src DESC --dst DESC [--db PATH]
    hartogs-engine aut       --src DESC [--samples N]
    hartogs-engine eval      --map MAP --points POINTS
    hartogs-engine verify    (--map MAP | --src DESC --dst DESC) [--suite all] [--count N] [--workers N] [--db PATH]
    hartogs-engine levi      --p 1,1 --q 1 --point PAIRS --tangent PAIRS

Descriptors are JSON objects {"p": [...], "q": [...]} with exponents written
"a", "a/b", "a/b*L" or "L". Arguments taking JSON also accept @file.

Exit codes:
    0 success, 2 parse error, 3 no proper map, 4 dimension mismatch,
    5 domain error, 6 verification failed

License: Apache-2.0
"""

import copy
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
import yaml
from loguru import logger
from rich.console import Console
from rich.table import Table

from ellipsoid_core import pairs_to_vector, vector_to_pairs
from exponent_core import parse_exponent, parse_exponent_vec
from hartogs_core import (
    HartogsProperMap,
    aut_family,
    aut_sample,
    canonical_proper,
    domain_from_dict,
    evaluate,
    exists_proper,
    join_point,
    map_from_dict,
    rigidity_witness,
    split_point,
)
from hartogs_errors import (
    EXIT_NO_PROPER_MAP,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
    HartogsError,
    ParseError,
)
from report_store import ReportStore
from verify_core import levi_data, resolve_suite, run_suite

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} - {name} - {level} - {message}"
DEFAULT_LOG_FILE = "hartogs_engine.log"


# ===== Configuration =====

@dataclass
class CliConfig:
    tolerance: float = 1e-9
    lambda_value: float = math.sqrt(2.0)
    seed: int = 42
    output: str = "json"
    workers: int = 1
    count: int = 200
    suite: str = "all"
    log_level: str = "WARNING"
    log_file: Optional[str] = None
    db_path: Optional[str] = None

    def validate(self) -> "CliConfig":
        if not 0.0 < self.tolerance < 1e-3:
            raise ParseError(f"tolerance must lie in (0, 1e-3), got {self.tolerance}")
        if not self.lambda_value > 0.0:
            raise ParseError(f"lambda value must be positive, got {self.lambda_value}")
        if self.output not in ("json", "text"):
            raise ParseError(f"output must be json or text, got {self.output!r}")
        if self.workers < 1:
            raise ParseError(f"workers must be >= 1, got {self.workers}")
        if self.count < 1:
            raise ParseError(f"count must be >= 1, got {self.count}")
        return self


def _get_default_config() -> Dict[str, Any]:
    return {
        "tolerance": 1e-9,
        "lambda_value": math.sqrt(2.0),
        "seed": 42,
        "output": "json",
        "workers": 1,
        "log_level": "WARNING",
        "log_file": None,
        "db_path": None,
        "verify": {
            "count": 200,
            "suite": "all",
        },
    }


def _deep_update(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """Defaults merged with a YAML file"""
    config = copy.deepcopy(_get_default_config())
    if config_path:
        if not os.path.exists(config_path):
            raise ParseError(f"config file not found: {config_path}")
        with open(config_path, "r") as f:
            try:
                user_config = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ParseError(f"config file is not valid YAML: {e}") from e
        if not isinstance(user_config, dict):
            raise ParseError("config file must hold a mapping")
        _deep_update(config, user_config)
    return config


def build_config(config: Dict[str, Any], overrides: Dict[str, Any]) -> CliConfig:
    """Flatten a loaded config and apply non-None overrides (env, flags)"""
    verify = config.get("verify", {})
    values = {
        "tolerance": float(config["tolerance"]),
        "lambda_value": float(config["lambda_value"]),
        "seed": int(config["seed"]),
        "output": str(config["output"]),
        "workers": int(config["workers"]),
        "count": int(verify.get("count", 200)),
        "suite": str(verify.get("suite", "all")),
        "log_level": str(config["log_level"]).upper(),
        "log_file": config.get("log_file"),
        "db_path": config.get("db_path"),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return CliConfig(**values).validate()


def setup_logging(level: str = "WARNING", log_file: Optional[str] = None):
    """stderr sink plus optional rotating file sink; stdout stays for results"""
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    if log_file:
        logger.add(log_file, level=level, format=LOG_FORMAT, rotation="10 MB")


# ===== Input helpers =====

def read_json_argument(text: str, what: str) -> Any:
    if text.startswith("@"):
        path = text[1:]
        try:
            with open(path, "r") as f:
                text = f.read()
        except OSError as e:
            raise ParseError(f"cannot read {what} file {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{what} is not valid JSON: {e}") from e


def read_points(text: str, n: int) -> List[Any]:
    """JSON array of points, each a list of [re, im] pairs split at index n"""
    if not text.startswith("@") and not text.lstrip().startswith("[") and os.path.exists(text):
        text = "@" + text
    payload = read_json_argument(text, "points")
    if not isinstance(payload, list) or not payload:
        raise ParseError("points must be a non-empty JSON array")
    if isinstance(payload[0], list) and payload[0] and not isinstance(payload[0][0], list):
        payload = [payload]
    return [split_point(pairs_to_vector(point), n) for point in payload]


def parse_pairs(text: str, what: str) -> np.ndarray:
    return pairs_to_vector(read_json_argument(text, what))


# ===== Output =====

class Emitter:
    def __init__(self, config: CliConfig):
        self.config = config
        self.console = Console()

    def emit(self, payload: Dict[str, Any], title: str = "result"):
        if self.config.output == "json":
            click.echo(json.dumps(payload, default=float))
            return
        table = Table(title=title)
        table.add_column("field")
        table.add_column("value")
        for key, value in payload.items():
            table.add_row(str(key), value if isinstance(value, str) else json.dumps(value, default=float))
        self.console.print(table)

    def emit_reports(self, reports):
        if self.config.output == "json":
            for report in reports:
                click.echo(report.to_json_line())
            return
        table = Table(title="verification")
        for column in ("property", "samples", "worst residual", "tolerance", "pass"):
            table.add_column(column)
        for report in reports:
            table.add_row(
                report.property, str(report.samples), f"{report.worst_residual:.3e}",
                f"{report.tolerance:.1e}", "[green]pass[/green]" if report.passed else "[red]FAIL[/red]",
            )
        self.console.print(table)


def _run(ctx: click.Context, action: Callable[[], Optional[int]]):
    """Run a command body, mapping engine errors to JSON error objects and exit codes"""
    emitter: Emitter = ctx.obj["emitter"]
    try:
        code = action()
    except HartogsError as e:
        logger.warning(f"{ctx.command.name}: {e}")
        emitter.emit(e.to_dict(), "error")
        ctx.exit(e.exit_code)
    ctx.exit(code or EXIT_OK)


def _domain(ctx: click.Context, text: str):
    return domain_from_dict(read_json_argument(text, "domain descriptor"), ctx.obj["config"].lambda_value)


# ===== Commands =====

@click.group()
@click.option("--tol", "tolerance", type=float, default=None, help="Membership tolerance")
@click.option("--lambda", "lambda_value", type=float, default=None, help="Numeric value of L")
@click.option("--seed", type=int, default=None, envvar="HARTOGS_SEED", help="Seed for all randomness")
@click.option("--out", "output", type=click.Choice(["json", "text"]), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML configuration file")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=None)
@click.option("--log-file", type=click.Path(), default=None, is_flag=False, flag_value=DEFAULT_LOG_FILE,
              help=f"Also log to a file (default {DEFAULT_LOG_FILE})")
@click.pass_context
def cli(ctx, tolerance, lambda_value, seed, output, config_path, log_level, log_file):
    """Proper holomorphic maps between generalized Hartogs triangles"""
    ctx.ensure_object(dict)
    try:
        config = build_config(
            load_config(config_path),
            {
                "tolerance": tolerance,
                "lambda_value": lambda_value,
                "seed": seed,
                "output": output,
                "log_level": log_level.upper() if log_level else None,
                "log_file": log_file,
            },
        )
    except HartogsError as e:
        click.echo(json.dumps(e.to_dict()))
        ctx.exit(e.exit_code)
    setup_logging(config.log_level, config.log_file)
    ctx.obj["config"] = config
    ctx.obj["emitter"] = Emitter(config)


@cli.command()
@click.option("--src", required=True, help="Source domain descriptor")
@click.option("--dst", required=True, help="Target domain descriptor")
@click.pass_context
def exists(ctx, src, dst):
    """Decide whether a proper holomorphic map src -> dst exists"""

    def action():
        witness = exists_proper(_domain(ctx, src), _domain(ctx, dst))
        emitter = ctx.obj["emitter"]
        if witness is None:
            emitter.emit({"status": "error", "reason": "no_proper_map",
                          "message": "no proper holomorphic map between these domains"}, "exists")
            return EXIT_NO_PROPER_MAP
        payload = witness.to_dict()
        case = payload.pop("case")
        emitter.emit({"status": "ok", "case": case, "witness": payload}, "exists")
        return EXIT_OK

    _run(ctx, action)


@cli.command()
@click.option("--src", required=True)
@click.option("--dst", required=True)
@click.option("--db", "db_path", type=click.Path(), default=None, help="Also record the map in this ledger")
@click.pass_context
def construct(ctx, src, dst, db_path):
    """Build the canonical proper map src -> dst"""

    def action():
        M = canonical_proper(_domain(ctx, src), _domain(ctx, dst))
        payload = M.to_dict()
        db = db_path or ctx.obj["config"].db_path
        if db:
            ReportStore(db).record_map(payload)
        ctx.obj["emitter"].emit({"status": "ok", "map": payload}, "construct")

    _run(ctx, action)


@cli.command()
@click.option("--src", required=True, help="Domain descriptor")
@click.option("--samples", type=int, default=0, help="Number of seeded family members to draw")
@click.pass_context
def aut(ctx, src, samples):
    """Describe the automorphism group and rigidity of a domain"""

    def action():
        D = _domain(ctx, src)
        seed = ctx.obj["config"].seed
        payload = {
            "status": "ok",
            "family": aut_family(D).to_dict(),
            "rigidity": rigidity_witness(D).to_dict(),
        }
        if samples > 0:
            payload["samples"] = [aut_sample(D, seed + i).to_dict() for i in range(samples)]
        ctx.obj["emitter"].emit(payload, "aut")

    _run(ctx, action)


@cli.command("eval")
@click.option("--map", "map_text", required=True, help="Map JSON or @file")
@click.option("--points", required=True, help="Points JSON, @file or path")
@click.pass_context
def eval_command(ctx, map_text, points):
    """Evaluate a map at points of its source domain"""

    def action():
        config = ctx.obj["config"]
        M = map_from_dict(read_json_argument(map_text, "map"), config.lambda_value)
        images = [
            vector_to_pairs(join_point(evaluate(M, point, config.tolerance))) for point in read_points(points, M.src.n)
        ]
        ctx.obj["emitter"].emit({"status": "ok", "images": images}, "eval")

    _run(ctx, action)


def _resolve_map(ctx: click.Context, map_text: Optional[str], src: Optional[str], dst: Optional[str]) -> HartogsProperMap:
    if map_text:
        return map_from_dict(read_json_argument(map_text, "map"), ctx.obj["config"].lambda_value)
    if src and dst:
        return canonical_proper(_domain(ctx, src), _domain(ctx, dst))
    raise ParseError("verify needs --map or both --src and --dst")


@cli.command()
@click.option("--map", "map_text", default=None)
@click.option("--src", default=None)
@click.option("--dst", default=None)
@click.option("--suite", default=None, help="all or a comma-separated list of properties")
@click.option("--count", type=int, default=None, help="Samples per property")
@click.option("--workers", type=int, default=None)
@click.option("--db", "db_path", type=click.Path(), default=None)
@click.pass_context
def verify(ctx, map_text, src, dst, suite, count, workers, db_path):
    """Run the verification suite; exits 6 when any property fails"""

    def action():
        config = ctx.obj["config"]
        M = _resolve_map(ctx, map_text, src, dst)
        try:
            names = resolve_suite(suite or config.suite)
        except ValueError as e:
            raise ParseError(str(e)) from e
        if count is not None and count < 1 or workers is not None and workers < 1:
            raise ParseError("--count and --workers must be >= 1")
        reports = run_suite(M, names, count or config.count, config.seed, workers or config.workers)
        db = db_path or config.db_path
        if db:
            ReportStore(db).record_run(M.to_dict(), reports)
        ctx.obj["emitter"].emit_reports(reports)
        return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFICATION_FAILED

    _run(ctx, action)


@cli.command()
@click.option("--p", "p_text", required=True, help="Comma-separated z exponents")
@click.option("--q", "q_text", required=True, help="w exponent")
@click.option("--point", required=True, help="[[re,im],...] for (z, w)")
@click.option("--tangent", required=True, help="[[re,im],...] for X")
@click.pass_context
def levi(ctx, p_text, q_text, point, tangent):
    """Both sides of the restricted Levi identity at a point of K"""

    def action():
        config = ctx.obj["config"]
        p = parse_exponent_vec(p_text)
        q = parse_exponent(q_text)
        flat = parse_pairs(point, "point")
        if flat.size != len(p) + 1:
            raise ParseError(f"point needs {len(p) + 1} coordinates, got {flat.size}")
        X = parse_pairs(tangent, "tangent")
        if X.size != len(p):
            raise ParseError(f"tangent needs {len(p)} coordinates, got {X.size}")
        data = levi_data(p, q, split_point(flat, len(p)), X, config.lambda_value)
        ctx.obj["emitter"].emit({"status": "ok", **data.to_dict()}, "levi")

    _run(ctx, action)


def main():
    cli(obj={})


if __name__ == "__main__":
    main()
