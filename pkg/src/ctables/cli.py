"""Command line runner: one command per tool or experiment, JSON reports, stable exit codes.

Settings come from built-in defaults, then a JSON ``--config`` file, then
command line flags. Every report echoes the merged config, so a result can be
reproduced from the report alone.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io as cio
from .core import Margins, OutsideHypothesisWarning, validate_table, make_table
from .counting import (
    ENUMERATION_CAP,
    cm_log_count,
    composition_polynomial,
    count_exact,
    enumerate_tables,
    is_symmetric_unimodal,
    rn_ratio,
    verify_margin_maximality,
)
from .entropy import barvinok_bounds, typical_table
from .errors import ResourceError
from .rng import check_seed, derive_seed
from .sampling import ChainSampler, RejectionSampler
from .stats import verify as V

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

OUT_ENV = "CTABLES_OUT"
DEFAULT_OUT = "ctables-out"

# exact cross-checks only when the row-state space is this small
SMALL_STATES = 5000

COMMANDS = (
    "count",
    "enumerate",
    "compositions",
    "margin-max",
    "typical",
    "bounds",
    "cm-estimate",
    "rn-ratio",
    "sample",
    "verify-marginal",
    "verify-joint",
    "verify-moments",
    "verify-max",
    "verify-esd",
)

DEFAULT_SIZES = {
    "verify-marginal": [10, 20, 40],
    "verify-joint": [10, 20, 40],
    "verify-moments": [10, 20, 40],
    "verify-max": [100],
    "verify-esd": [50, 100, 200],
}

DEFAULT_SAMPLES = {
    "sample": 10,
    "verify-marginal": 100_000,  # pooled entries per size
    "verify-joint": 2000,
    "verify-moments": 1000,
    "verify-max": 1000,
    "verify-esd": 1,
}

DEFAULT_TOLERANCES = {
    "residual": 1e-10,
    "dual_residual": 1e-9,
    "barvinok_slack": 1e-8,
    "slope_range": [-1.0, -0.2],
    "sigmas": 3.0,
    "max_exceedance": 0.05,
    "ks_bound": 0.08,
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: int = 2
    C: int = 2
    m: Optional[int] = None
    row: Optional[List[int]] = None
    col: Optional[List[int]] = None
    caps: Optional[List[int]] = None
    N: Optional[int] = None
    eps: float = 1.0
    k: int = 2
    r: Optional[int] = None
    sizes: Optional[List[int]] = None
    sampler: str = "chain"
    samples: Optional[int] = None
    burn_in: Optional[int] = None
    thin: Optional[int] = None
    sweeps: Optional[float] = None
    chains: int = 1
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in d:
            raise UsageError("config needs a command")
        try:
            cfg = cls(**d)
        except TypeError as e:
            raise UsageError(str(e)) from None
        cfg.validate()
        return cfg

    def resolved(self) -> dict:
        """Config with command defaults filled in, as echoed into reports."""
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if self.command in DEFAULT_SIZES:
            d["sizes"] = self.sizes or DEFAULT_SIZES[self.command]
        if d["samples"] is None and self.command in DEFAULT_SAMPLES:
            d["samples"] = DEFAULT_SAMPLES[self.command]
        if d["sweeps"] is None:
            d["sweeps"] = 25.0 if self.command.startswith("verify-") else 1.0
        d["tolerances"] = {**DEFAULT_TOLERANCES, **self.tolerances}
        d.pop("out")
        return d

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")

        def pos_int(name, v, minimum=1):
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < minimum):
                raise UsageError(f"{name} must be an integer >= {minimum}, got {v!r}")

        pos_int("n", self.n)
        pos_int("C", self.C)
        pos_int("m", self.m)
        pos_int("k", self.k)
        pos_int("N", self.N, 0)
        pos_int("samples", self.samples)
        pos_int("burn_in", self.burn_in, 0)
        pos_int("thin", self.thin)
        pos_int("chains", self.chains)
        pos_int("r", self.r)
        for name in ("sizes", "caps", "row", "col"):
            v = getattr(self, name)
            if v is not None:
                if not isinstance(v, list) or not v:
                    raise UsageError(f"{name} must be a non-empty list")
                for x in v:
                    pos_int(name, x, 1 if name == "sizes" else 0)
        if (self.row is None) != (self.col is None):
            raise UsageError("row and col margins go together")
        if self.row is not None and sum(self.row) != sum(self.col):
            raise UsageError("row and col margins must have equal totals")
        if not isinstance(self.eps, (int, float)) or self.eps <= 0:
            raise UsageError("eps must be positive")
        if self.sweeps is not None and (not isinstance(self.sweeps, (int, float)) or self.sweeps <= 0):
            raise UsageError("sweeps must be positive")
        if self.sampler not in ("chain", "rejection"):
            raise UsageError(f"unknown sampler {self.sampler!r}")
        if self.format not in ("csv", "json", "bin"):
            raise UsageError(f"unknown format {self.format!r}")
        if not isinstance(self.tolerances, dict) or set(self.tolerances) - set(DEFAULT_TOLERANCES):
            raise UsageError(f"tolerances may only set {sorted(DEFAULT_TOLERANCES)}")
        try:
            check_seed(self.seed)
        except (TypeError, ValueError) as e:
            raise UsageError(str(e)) from None
        if self.command == "rn-ratio" and self.r is not None and self.r >= self.n:
            raise UsageError("rn-ratio needs r < n")
        if self.command == "verify-joint":
            if self.k > min(self.sizes or DEFAULT_SIZES["verify-joint"]):
                raise UsageError("block size k exceeds a table size")
        if self.command.startswith("verify-") and self.C < 1:
            raise UsageError("verification needs C >= 1")


@dataclass
class RunReport:
    experiment: str
    config: dict
    value: object = None
    checks: List[dict] = field(default_factory=list)
    rows: List[dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def add_check(self, statistic, value, reference, passed, tolerance=None, error_bar=None, n=None):
        cfg = self.config
        self.checks.append(
            {
                "experiment": self.experiment,
                "n": cfg.get("n") if n is None else n,
                "C": cfg.get("C"),
                "seed": cfg.get("seed"),
                "statistic": statistic,
                "value": value,
                "error_bar": error_bar,
                "reference": reference,
                "tolerance": tolerance,
                "pass": bool(passed),
            }
        )

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "n": self.config.get("n"),
            "C": self.config.get("C"),
            "seed": self.config.get("seed"),
            "config": self.config,
            "value": self.value,
            "checks": self.checks,
            "rows": self.rows,
            "notes": self.notes,
            "artifacts": self.artifacts,
            "wall_clock_s": self.wall_clock_s,
            "pass": self.passed,
        }


# --------------------------------------------------------------------------- helpers


def _margins(cfg: dict) -> Margins:
    if cfg["row"] is not None:
        return Margins(cfg["row"], cfg["col"])
    m = cfg["m"] or cfg["n"]
    if m == cfg["n"]:
        return Margins.uniform(cfg["n"], cfg["C"], warn=False)
    # rectangular with constant row sums C*n and column sums C*m
    return Margins((cfg["C"] * cfg["n"],) * m, (cfg["C"] * m,) * cfg["n"])


def _small(margins: Margins) -> bool:
    a, b = sorted(margins.shape)
    return math.comb(margins.total + a - 1, a - 1) <= SMALL_STATES


def _sampler(cfg: dict):
    if cfg["sampler"] == "rejection":
        return RejectionSampler()
    return ChainSampler(burn_in=cfg["burn_in"], thin=cfg["thin"], chains=cfg["chains"], sweeps=cfg["sweeps"])


class _Writer:
    def __init__(self, out: Path, report: RunReport):
        self.out = out
        self.report = report

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.report.artifacts.append(name)
        return self.out / name


def _stem(cfg: dict) -> str:
    return f"{cfg['command']}_n{cfg['n']}_C{cfg['C']}_seed{cfg['seed']}"


# --------------------------------------------------------------------------- commands


def _cmd_count(cfg, rep, w):
    margins = _margins(cfg)
    c = count_exact(margins)
    rep.value = cio.count_to_str(c)
    if c <= 100_000:
        listed = len(enumerate_tables(margins, cap=100_000))
        rep.add_check("count equals enumeration", rep.value, cio.count_to_str(listed), listed == c)
    else:
        rep.add_check("count", rep.value, None, True)


def _cmd_enumerate(cfg, rep, w):
    margins = _margins(cfg)
    expected = count_exact(margins)
    if expected > ENUMERATION_CAP:
        raise ResourceError(f"{expected} tables exceed the enumeration cap {ENUMERATION_CAP}")
    tables = enumerate_tables(margins)
    n = cio.write_stream(w.path(f"{_stem(cfg)}_tables.{cfg['format']}"), tables, cfg["format"])
    rep.value = cio.count_to_str(n)
    rep.add_check("enumeration equals count", rep.value, cio.count_to_str(expected), n == expected)


def _cmd_compositions(cfg, rep, w):
    caps = cfg["caps"] or [cfg["C"]] * cfg["n"]
    coeffs = composition_polynomial(caps)
    rep.rows = [{"r": r, "count": cio.count_to_str(c)} for r, c in enumerate(coeffs)]
    r = cfg["r"]
    if r is None:
        rep.value = [cio.count_to_str(c) for c in coeffs]
    else:
        rep.value = cio.count_to_str(coeffs[r] if r < len(coeffs) else 0)
    cio.write_two_column_csv(w.path(f"{_stem(cfg)}_coefficients.csv"), enumerate(coeffs), ("r", "count"))
    rep.add_check("coefficients symmetric and unimodal", len(coeffs), None, is_symmetric_unimodal(coeffs))


def _cmd_margin_max(cfg, rep, w):
    m = cfg["m"] or cfg["n"]
    N = cfg["N"] if cfg["N"] is not None else cfg["C"] * max(m, cfg["n"])
    res = verify_margin_maximality(m, cfg["n"], N)
    rep.rows = [res.to_dict()]
    rep.value = cio.count_to_str(res.balanced_count)
    rep.add_check("balanced margins maximise the count", rep.value, cio.count_to_str(res.max_count), res.ok)


def _cmd_typical(cfg, rep, w):
    margins = _margins(cfg)
    tol = cfg["tolerances"]
    tt = typical_table(margins, tol=tol["residual"])
    cio.dump_json(w.path(f"{_stem(cfg)}_typical.json"), tt.to_dict())
    rep.value = tt.gZ
    rep.add_check("margin residual", tt.residual, 0.0, tt.residual < tol["residual"], tolerance=tol["residual"])
    dual = tt.dual_residual()
    rep.add_check("dual residual", dual, 0.0, dual < tol["dual_residual"], tolerance=tol["dual_residual"])
    if margins.density is not None:
        gap = float(np.max(np.abs(tt.Z - margins.density)))
        rep.add_check("max |Z - C|", gap, 0.0, gap < tol["dual_residual"], tolerance=tol["dual_residual"])


def _cmd_bounds(cfg, rep, w):
    margins = _margins(cfg)
    b = barvinok_bounds(margins, tol=cfg["tolerances"]["residual"])
    rep.rows = [b.to_dict()]
    rep.value = b.log_upper
    if _small(margins):
        c = count_exact(margins)
        log_c = math.log(c) if c else -math.inf
        slack = cfg["tolerances"]["barvinok_slack"]
        rep.add_check("ln count <= g(Z)", log_c, b.log_upper, log_c <= b.log_upper + slack, tolerance=slack)


def _cmd_cm(cfg, rep, w):
    n, C = cfg["n"], cfg["C"]
    m = cfg["m"] or n
    est = cm_log_count(m, n, C * n, C * m)
    rep.rows = [est.to_dict()]
    rep.value = est.log_count
    margins = _margins({**cfg, "row": None})
    if _small(margins):
        exact = math.log(count_exact(margins))
        rep.rows[0]["log_count_exact"] = exact
        rep.rows[0]["abs_error"] = abs(est.log_count - exact)
    if not est.applicable:
        rep.notes.append("outside the estimate's growth hypothesis for these constants")


def _cmd_rn(cfg, rep, w):
    r = cfg["r"] if cfg["r"] is not None else 1
    res = rn_ratio(cfg["n"], cfg["C"], r)
    rep.rows = [res.to_dict()]
    rep.value = res.ratio
    rep.notes.append(f"method: {res.method}")


def _cmd_sample(cfg, rep, w):
    margins = _margins(cfg)
    arr = _sampler(cfg)(margins, cfg["samples"], derive_seed(cfg["seed"], "sample"))
    cio.write_stream(w.path(f"{_stem(cfg)}_samples.{cfg['format']}"), arr, cfg["format"])
    ok = all(validate_table(make_table(x, margins)) for x in arr)
    rep.value = int(len(arr))
    rep.add_check("every sample has the requested margins", int(len(arr)), cfg["samples"], ok)


def _run_verify(cfg, rep, w, fn):
    exp = fn(cfg)
    rep.rows = exp.rows
    rep.notes.extend(exp.notes)
    for c in exp.checks:
        rep.add_check(c.statistic, c.value, c.reference, c.passed, tolerance=c.tolerance, error_bar=c.error_bar, n=c.n)
    for name, rows in sorted(exp.data.items()):
        header = ("sigma", "ecdf") if name.startswith("spectrum") else ("x", "frequency")
        cio.write_two_column_csv(w.path(f"{_stem(cfg)}_{name}.csv"), rows, header)
    rep.value = exp.checks[-1].value if exp.checks else None


def _verify(name):
    def go(cfg):
        tol = cfg["tolerances"]
        s = _sampler(cfg)
        sizes, C, seed, S = cfg["sizes"], cfg["C"], cfg["seed"], cfg["samples"]
        if name == "marginal":
            return V.verify_marginal(sizes, C, s, entries=S, seed=seed, slope_range=tuple(tol["slope_range"]))
        if name == "joint":
            return V.verify_joint(sizes, C, cfg["k"], s, samples=S, seed=seed, eps=cfg["eps"])
        if name == "moments":
            return V.verify_moments(sizes, C, s, samples=S, seed=seed, sigmas=tol["sigmas"])
        if name == "max":
            exp = V.verify_max_entry(sizes, C, cfg["eps"], s, samples=S, seed=seed, bound=tol["max_exceedance"])
            iid = V.iid_max_bounds(sizes, C)
            exp.checks.extend(iid.checks)
            return exp
        if name == "esd":
            return V.verify_esd(sizes, C, s, samples=S, seed=seed, ks_bound=tol["ks_bound"])
        raise AssertionError(name)

    return lambda cfg, rep, w: _run_verify(cfg, rep, w, go)


HANDLERS = {
    "count": _cmd_count,
    "enumerate": _cmd_enumerate,
    "compositions": _cmd_compositions,
    "margin-max": _cmd_margin_max,
    "typical": _cmd_typical,
    "bounds": _cmd_bounds,
    "cm-estimate": _cmd_cm,
    "rn-ratio": _cmd_rn,
    "sample": _cmd_sample,
    "verify-marginal": _verify("marginal"),
    "verify-joint": _verify("joint"),
    "verify-moments": _verify("moments"),
    "verify-max": _verify("max"),
    "verify-esd": _verify("esd"),
}


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)


def run(cfg: ExperimentConfig, out: Optional[Path] = None) -> RunReport:
    """Execute one experiment and write its report (and data files) under ``out``."""
    cfg.validate()
    out = Path(out if out is not None else (cfg.out or default_out()))
    resolved = cfg.resolved()
    rep = RunReport(cfg.command, resolved)
    w = _Writer(out, rep)
    t0 = time.perf_counter()
    HANDLERS[cfg.command](resolved, rep, w)
    rep.wall_clock_s = round(time.perf_counter() - t0, 3)
    out.mkdir(parents=True, exist_ok=True)
    cio.dump_json(out / f"{_stem(resolved)}.json", rep.to_dict())
    return rep


def _member_error(idx, kind, message):
    return {"index": idx, "status": kind, "error": message, "pass": False}


def suite(configs: list, root_seed: int = 0, out: Optional[Path] = None) -> dict:
    """Run each config in order; failures are recorded per member and never stop the rest.

    Members without an explicit seed get ``derive_seed(root_seed, "member", index)``.
    """
    out = Path(out) if out is not None else default_out()
    members = []
    for idx, raw in enumerate(configs):
        member_out = out / f"member{idx:03d}"
        try:
            if not isinstance(raw, dict):
                raise UsageError("suite members must be objects")
            d = dict(raw)
            d.setdefault("seed", derive_seed(root_seed, "member", idx))
            d.pop("out", None)
            rep = run(ExperimentConfig.from_dict(d), member_out)
            members.append(
                {
                    "index": idx,
                    "experiment": rep.experiment,
                    "status": "ok" if rep.passed else "check-failure",
                    "report": str(Path(f"member{idx:03d}") / f"{_stem(rep.config)}.json"),
                    "pass": rep.passed,
                }
            )
        except UsageError as e:
            members.append(_member_error(idx, "usage", str(e)))
        except (ResourceError, MemoryError) as e:
            members.append(_member_error(idx, "resource", str(e)))
        except ValueError as e:
            members.append(_member_error(idx, "usage", str(e)))
    failed = [m["index"] for m in members if not m["pass"]]
    agg = {
        "experiment": "suite",
        "seed": root_seed,
        "count": len(members),
        "members": members,
        "failed": failed,
        "pass": not failed,
    }
    out.mkdir(parents=True, exist_ok=True)
    cio.dump_json(out / "suite.json", agg)
    return agg


# --------------------------------------------------------------------------- argument parsing


def _u64(text):
    try:
        return check_seed(int(text, 0))
    except (TypeError, ValueError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=_u64, help="root seed (unsigned 64-bit)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--sampler", choices=("chain", "rejection"))
    common.add_argument("--n", type=int)
    common.add_argument("--C", type=int)
    common.add_argument("--eps", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--r", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--burn-in", dest="burn_in", type=int)
    common.add_argument("--thin", type=int)
    common.add_argument("--format", choices=("csv", "json", "bin"))

    parser = argparse.ArgumentParser(prog="ctables", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    sub.add_parser("suite", parents=[common], help="run a JSON list of configs given with --config")
    return parser


FLAG_KEYS = ("seed", "sampler", "n", "C", "eps", "k", "r", "samples", "burn_in", "thin", "format", "out")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from None


def config_from_args(args) -> ExperimentConfig:
    d = {}
    if args.config:
        d = _load_json(args.config)
        if not isinstance(d, dict):
            raise UsageError("config file must hold a JSON object")
    d["command"] = args.command
    for key in FLAG_KEYS:
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if args.n is not None and args.command in DEFAULT_SIZES:
        d["sizes"] = [args.n]
    return ExperimentConfig.from_dict(d)


def _print_checks(checks):
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['experiment']} n={c['n']} {c['statistic']}: {c['value']}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    import warnings

    warnings.simplefilter("ignore", OutsideHypothesisWarning)
    try:
        if args.command == "suite":
            if not args.config:
                raise UsageError("suite needs --config with a list of configs")
            doc = _load_json(args.config)
            seed = args.seed if args.seed is not None else 0
            if isinstance(doc, dict):
                seed = args.seed if args.seed is not None else doc.get("seed", 0)
                doc = doc.get("configs")
            if not isinstance(doc, list):
                raise UsageError("suite config must be a list or an object with 'configs'")
            out = Path(args.out) if args.out else default_out()
            agg = suite(doc, check_seed(seed), out)
            for m in agg["members"]:
                print(f"{'PASS' if m['pass'] else 'FAIL'} member {m['index']} {m.get('experiment', '')} {m['status']}")
            print(f"suite: {agg['count']} experiments, {len(agg['failed'])} failed")
            return EXIT_OK if agg["pass"] else EXIT_CHECK
        cfg = config_from_args(args)
        rep = run(cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceError, MemoryError) as e:
        print(f"resource error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{rep.experiment}: value {rep.value}")
    _print_checks(rep.checks)
    return EXIT_OK if rep.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
