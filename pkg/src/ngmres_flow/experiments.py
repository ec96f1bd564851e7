"""Experiment harness: run configuration, presets, and CSV/JSON logging.

CSV schema (stable):
    k,g_vprime,g_l2,picard_resid_h1,theta,gamma,kappa_hat,max_abs_alpha,alpha_json,wall_ms

Floats are written with repr (shortest round-trip), so identical configs
produce byte-identical CSVs.  The wall_ms column is zero unless timings are
explicitly requested, since measured times would break that reproducibility;
measured totals always land in the JSON metadata.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .accel import DriverConfig, DriveResult, IterationRecord, NormChoice, drive
from .flow import FlowProblem
from .grid import BoundaryData, MacGrid

CSV_HEADER = "k,g_vprime,g_l2,picard_resid_h1,theta,gamma,kappa_hat,max_abs_alpha,alpha_json,wall_ms"

EXIT_OK = 0
EXIT_MAX_ITERS = 2
EXIT_DIVERGED = 3
EXIT_CONFIG = 64


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    re: float = 1000.0
    nx: int = 64
    m: object = 0                      # int, "inf", or (m_early, switch_tol, m_late)
    norm: str = "vprime"
    tol: float = 1e-8
    max_iters: int = 100
    mode: str = "ngmres"
    lid_speed: float = 1.0
    timings: bool = False

    def validate(self):
        if self.re <= 0:
            raise ConfigError("re must be positive")
        if self.nx < 8:
            raise ConfigError("nx must be at least 8")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.norm not in ("vprime", "l2"):
            raise ConfigError("norm must be 'vprime' or 'l2'")
        if self.mode not in ("picard", "ngmres"):
            raise ConfigError("mode must be 'picard' or 'ngmres'")
        _parse_depth(self.m)

    def label(self) -> str:
        if self.mode == "picard":
            return f"picard nx={self.nx} Re={self.re:g}"
        return f"ngmres m={_depth_label(self.m)} {self.norm} nx={self.nx} Re={self.re:g}"


def _parse_depth(m):
    """Normalize the depth spec into DriverConfig fields (m, schedule)."""
    if isinstance(m, str):
        if m == "inf":
            return None, None
        parts = m.split(":")
        if len(parts) == 3:
            return None, (int(parts[0]), float(parts[1]), int(parts[2]))
        try:
            return int(m), None
        except ValueError:
            raise ConfigError(f"m: cannot parse depth spec {m!r}") from None
    if isinstance(m, (tuple, list)):
        if len(m) != 3:
            raise ConfigError("m: schedule must be (m_early, switch_tol, m_late)")
        return None, (int(m[0]), float(m[1]), int(m[2]))
    if m is None:
        return None, None
    if isinstance(m, int) and m >= 0:
        return m, None
    raise ConfigError(f"m: invalid depth {m!r}")


def _depth_label(m) -> str:
    depth, schedule = _parse_depth(m)
    if schedule is not None:
        return f"{schedule[0]}:{schedule[1]:g}:{schedule[2]}"
    return "inf" if depth is None else str(depth)


@dataclass
class RunLog:
    config: RunConfig
    records: list
    status: str
    iterations: int
    wall_ms_total: float
    linear_solves: int
    riesz_solves: int

    @property
    def exit_code(self) -> int:
        return {"converged": EXIT_OK, "max_iters": EXIT_MAX_ITERS}.get(
            self.status, EXIT_DIVERGED
        )


def build_problem(cfg: RunConfig) -> FlowProblem:
    return FlowProblem(
        grid=MacGrid(cfg.nx, cfg.nx),
        nu=1.0 / cfg.re,
        bc=BoundaryData(lid_speed=cfg.lid_speed),
    )


def run(cfg: RunConfig) -> RunLog:
    """Execute one deterministic run from the standard zero initial guess."""
    cfg.validate()
    depth, schedule = _parse_depth(cfg.m)
    driver = DriverConfig(
        m=depth,
        schedule=schedule,
        norm=NormChoice(cfg.norm),
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        mode=cfg.mode,
    )
    prob = build_problem(cfg)
    t0 = time.perf_counter()
    result = drive(prob, driver)
    wall = (time.perf_counter() - t0) * 1000.0
    return RunLog(
        config=cfg,
        records=result.records,
        status=result.status,
        iterations=result.records[-1].k if result.records else 0,
        wall_ms_total=wall,
        linear_solves=result.linear_solves,
        riesz_solves=result.riesz_solves,
    )


def sweep_mesh(cfg: RunConfig, sizes) -> list:
    """One run per grid size with all other parameters fixed.

    Failures are isolated per member: a failed run is skipped and the sweep
    continues.  Parallelism is capped by NGMRES_FLOW_THREADS (default 1).
    """
    sizes = list(sizes)
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sizes must be nondecreasing")
    configs = [replace(cfg, nx=n) for n in sizes]
    threads = int(os.environ.get("NGMRES_FLOW_THREADS", "1"))

    def member(c):
        try:
            return run(c)
        except ConfigError:
            raise
        except Exception:
            return None

    if threads > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            logs = list(pool.map(member, configs))
    else:
        logs = [member(c) for c in configs]
    return [log for log in logs if log is not None]


def compare_norms(cfg: RunConfig):
    """Paired runs differing only in the optimization norm."""
    log_v = run(replace(cfg, norm="vprime"))
    log_l = run(replace(cfg, norm="l2"))
    return log_v, log_l


def _fmt(x: float) -> str:
    return repr(float(x))


def _record_row(rec: IterationRecord, timings: bool) -> str:
    wall = rec.wall_time_ms if timings else 0.0
    if not timings or math.isnan(wall):
        wall = 0.0
    return ",".join(
        [
            str(rec.k),
            _fmt(rec.g_vprime),
            _fmt(rec.g_l2),
            _fmt(rec.picard_resid_h1),
            _fmt(rec.theta),
            _fmt(rec.gamma),
            _fmt(rec.kappa_hat),
            _fmt(rec.max_abs_alpha),
            '"' + json.dumps(rec.alpha).replace('"', '""') + '"',
            _fmt(wall),
        ]
    )


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(log: RunLog, path):
    lines = [CSV_HEADER]
    lines += [_record_row(r, log.config.timings) for r in log.records]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_combined_csv(logs, path, key: str, values):
    """Runs side by side with a leading key column (e.g. nx or norm)."""
    lines = [f"{key},{CSV_HEADER}"]
    for val, log in zip(values, logs):
        lines += [f"{val}," + _record_row(r, log.config.timings) for r in log.records]
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def write_json(log: RunLog, path):
    meta = {
        "config": {k: _jsonable(v) for k, v in vars(log.config).items()},
        "status": log.status,
        "iterations": log.iterations,
        "final_g_vprime": _jsonable(log.records[-1].g_vprime) if log.records else None,
        "totals": {
            "wall_ms": log.wall_ms_total,
            "linear_solves": log.linear_solves,
            "riesz_solves": log.riesz_solves,
        },
    }
    _atomic_write(path, json.dumps(meta, indent=2) + "\n")


def read_csv(path) -> RunLog:
    """Rehydrate per-iteration records from a CSV (for the plot command)."""
    import csv as _csv

    records = []
    with open(path, newline="") as fh:
        for row in _csv.DictReader(fh):
            records.append(
                IterationRecord(
                    k=int(row["k"]),
                    g_vprime=float(row["g_vprime"]),
                    g_l2=float(row["g_l2"]),
                    picard_resid_h1=float(row["picard_resid_h1"]),
                    theta=float(row["theta"]),
                    gamma=float(row["gamma"]),
                    kappa_hat=float(row["kappa_hat"]),
                    alpha=json.loads(row["alpha_json"]) if row["alpha_json"] else [],
                    max_abs_alpha=float(row["max_abs_alpha"]),
                    wall_time_ms=float(row["wall_ms"]),
                )
            )
    cfg = RunConfig()
    return RunLog(
        config=cfg,
        records=records,
        status="unknown",
        iterations=records[-1].k if records else 0,
        wall_ms_total=float("nan"),
        linear_solves=0,
        riesz_solves=0,
    )
