"""Run orchestration: execute configs, produce text artifacts, run scans."""
from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .config import RunConfig, build_problem, iterate_options
from .engine import OptimizationRecord, iterate
from .errors import ConfigError, DivergenceError
from .textio import dump_field

_FLOAT_FMT = "%.17g"

#: config fields that `scan` may vary, mapped to (section, attribute, type)
SCANNABLE = {
    "lambda_a": ("running_cost", "lambda_a", float),
    "lambda_b": ("running_cost", "lambda_b", float),
    "lambda0": ("functional", "lambda0", float),
    "a_bar": ("sigma", "a_bar", float),
    "b_bar": ("sigma", "b_bar", float),
    "c_bar": ("sigma", "c_bar", float),
    "eps_a": ("sigma", "eps_a", float),
    "eps_b": ("sigma", "eps_b", float),
    "eps_c": ("sigma", "eps_c", float),
    "eps0": ("guess", "eps0", float),
    "max_iter": ("stopping", "max_iter", int),
    "seed": ("", "seed", int),
}


def worker_count() -> int:
    """Worker cap for scan parallelism, from KROTOV_THREADS (default 1)."""
    raw = os.environ.get("KROTOV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class RunArtifacts:
    status: str  # "ok" or "diverged"
    record: OptimizationRecord
    convergence_csv: str
    field_text: str
    overlaps_text: str
    summary: dict
    warnings: list = dataclass_field(default_factory=list)


def _overlaps_text(record: OptimizationRecord, problem) -> str:
    """Final overlaps <target_k|phi_k(T)>: 'k re im abs_sq' per line."""
    out = io.StringIO()
    out.write("# k re_tau im_tau abs_sq\n")
    if record.final_states is None:
        return out.getvalue()
    finals = record.final_states.states
    targets = problem.targets.states
    for k in range(targets.shape[0]):
        tau_k = complex(np.sum(targets[k].conj() * finals[k]))
        out.write(
            f"{k} " + (_FLOAT_FMT % tau_k.real) + " "
            + (_FLOAT_FMT % tau_k.imag) + " "
            + (_FLOAT_FMT % abs(tau_k) ** 2) + "\n"
        )
    return out.getvalue()


def _summarize(record: OptimizationRecord, status: str) -> dict:
    nan = float("nan")
    last = record.entries[-1] if record.entries else None
    return {
        "status": status,
        "iterations": int(record.iterations),
        "final_j": float(last.j_total) if last else nan,
        "final_j_t": float(last.j_final) if last else nan,
        "final_j_norm": float(last.j_normalized) if last else nan,
        "violations": int(record.violations()),
        "max_retries": int(record.max_retries()),
        "message": record.message,
    }


def execute_run(config: RunConfig, collect_numeric: bool = False
                ) -> RunArtifacts:
    """Run one optimization; divergence yields the partial record."""
    problem = build_problem(config)
    options = iterate_options(config, collect_numeric=collect_numeric)
    warnings = []
    try:
        record = iterate(problem, options)
        status = "ok"
    except DivergenceError as exc:
        record = exc.record
        status = "diverged"
        warnings.append(str(exc))
    field_text = ""
    if record is not None and record.final_field is not None:
        field_text = dump_field(record.final_field, problem.grid)
    return RunArtifacts(
        status=status,
        record=record,
        convergence_csv=record.to_csv(),
        field_text=field_text,
        overlaps_text=_overlaps_text(record, problem),
        summary=_summarize(record, status),
        warnings=warnings,
    )


@dataclass
class ScanResult:
    parameter: str
    values: list
    runs: list  # RunArtifacts, in configured value order
    summary_csv: str
    warnings: list = dataclass_field(default_factory=list)


def apply_scan_value(config: RunConfig, parameter: str, value) -> RunConfig:
    if parameter not in SCANNABLE:
        raise ConfigError(
            f"parameter {parameter!r} is not scannable; choose one of "
            f"{sorted(SCANNABLE)}"
        )
    section, attribute, caster = SCANNABLE[parameter]
    updated = config.model_copy(deep=True)
    holder = updated if not section else getattr(updated, section)
    setattr(holder, attribute, caster(value))
    return RunConfig.model_validate(updated.model_dump())


def execute_scan(config: RunConfig, parameter: str, values) -> ScanResult:
    """Independent runs per value; summary reduced in configured order."""
    values = list(values)
    if not values:
        return ScanResult(parameter=parameter, values=[], runs=[],
                          summary_csv="", warnings=["empty value list: no-op"])
    configs = [apply_scan_value(config, parameter, v) for v in values]
    workers = min(worker_count(), len(configs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(execute_run, configs))
    else:
        runs = [execute_run(cfg) for cfg in configs]

    out = io.StringIO()
    out.write("parameter,value,iterations,final_J,final_J_T,final_J_norm,"
              "violations,status\n")
    for value, run in zip(values, runs):
        s = run.summary
        out.write(
            f"{parameter},{_FLOAT_FMT % float(value)},{s['iterations']},"
            + repr(s["final_j"]) + "," + repr(s["final_j_t"]) + ","
            + repr(s["final_j_norm"]) + f",{s['violations']},{s['status']}\n"
        )
    warnings = [w for run in runs for w in run.warnings]
    return ScanResult(parameter=parameter, values=values, runs=runs,
                      summary_csv=out.getvalue(), warnings=warnings)
