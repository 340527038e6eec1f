"""Scenario engine: occupation sweeps, κ threshold scans, and their flat-file output."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
import csv
from dataclasses import dataclass, field, replace
import io
import json
import logging
import math
from pathlib import Path
import sys
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from django.conf import settings
from django.utils import timezone

from .errors import SolverError, SweepError
from .model import FIGURE_RANGE_MAX, SystemParams, lamb_dicke_couplings, rates_to_reduced
from .solver import SolverConfig
from .thermo import (
    COMMON,
    FIXED_ATOM,
    FIXED_FIELD,
    ReferenceFrequencies,
    ResponseCurve,
    ResponseSample,
    response_sample,
    steady_point,
)

logger = logging.getLogger(__name__)

KAPPA_SCAN = "kappa-scan"
SWEEP_MODES = (COMMON, FIXED_FIELD, FIXED_ATOM, KAPPA_SCAN)
OUTPUT_FORMATS = ("csv", "json")

CSV_COLUMNS = (
    "m_th",
    "n_th",
    "ea_over_omega0",
    "ef_over_nu",
    "e_int",
    "c_atom",
    "c_field",
    "n_fock_used",
    "residual",
)
KAPPA_COLUMNS = ("g", "kappa", "cooling", "min_slope", "at_occupation")

# Occupations probed for a bosonic cooling region during κ scans: 0.05, 0.10, …, 3.0.
SCAN_OCCUPATIONS = tuple(round(0.05 * i, 12) for i in range(1, 61))
KAPPA_TOL = 0.01
# Couplings g/γ scanned per sideband order; the reported threshold is the largest over the set.
DEFAULT_SCAN_COUPLINGS = {1: (1.0, 2.0), 2: (0.2, 0.5, 1.0)}
# A field-energy decrease smaller than this between neighbouring occupations is noise.
COOLING_SLOPE_TOL = 1e-9

# Failures that turn a grid point into an error row instead of aborting the sweep.
POINT_ERRORS = (SolverError, ValueError, ArithmeticError, np.linalg.LinAlgError)


def parse_grid(text: str) -> Tuple[float, ...]:
    """``start:stop:step`` (stop included when it lies on the grid), a JSON list, or one number."""

    text = text.strip()
    if ":" not in text and not text.startswith("["):
        try:
            value = float(text)
        except ValueError as exc:
            raise ValueError(f"Grid must be start:stop:step, a JSON list or a number, got {text!r}") from exc
        if not math.isfinite(value):
            raise ValueError(f"Grid value must be finite, got {text!r}")
        return (value,)
    if text.startswith("["):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"Unable to decode grid list {text!r}") from exc
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise ValueError("Grid list must contain numbers only")
        return tuple(float(v) for v in values)

    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"Grid must be start:stop:step or a JSON list, got {text!r}")
    try:
        start, stop, step = (float(part) for part in parts)
    except ValueError as exc:
        raise ValueError(f"Grid bounds must be numbers, got {text!r}") from exc
    if not step > 0 or stop < start:
        raise ValueError(f"Grid {text!r} needs step > 0 and stop ≥ start")
    count = math.floor((stop - start) / step + 1e-9)
    return tuple(round(start + i * step, 12) for i in range(count + 1))


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class SweepSpec:
    mode: str
    params: SystemParams
    grid: Tuple[float, ...]
    fixed_n: Tuple[float, ...] = ()
    fixed_m: Tuple[float, ...] = ()
    # Occupations probed per κ in kappa-scan mode.
    occupations: Tuple[float, ...] = SCAN_OCCUPATIONS
    freqs: ReferenceFrequencies = field(default_factory=ReferenceFrequencies)
    solver: SolverConfig = field(default_factory=SolverConfig.from_settings)
    fd_step: Optional[float] = None
    output_format: str = "csv"
    output_path: Optional[str] = None

    def __post_init__(self) -> None:
        for name in ("grid", "fixed_n", "fixed_m", "occupations"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.mode not in SWEEP_MODES:
            raise ValueError(f"mode must be one of {SWEEP_MODES}, got {self.mode!r}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}")
        if not self.grid:
            raise ValueError("Sweep grid is empty")
        if not _strictly_increasing(self.grid):
            raise ValueError("Sweep grid must be strictly increasing")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ValueError(f"fd_step must be positive, got {self.fd_step}")

        if self.mode == KAPPA_SCAN:
            if self.params.k not in (1, 2):
                raise ValueError("Kappa scans need a sideband order k of 1 or 2")
            limit = FIGURE_RANGE_MAX * self.params.gamma
            if self.grid[0] < 0 or self.grid[-1] > limit:
                raise ValueError(f"Kappa grid must lie within [0, {limit:g}]")
            if not self.occupations or not _strictly_increasing(self.occupations) or self.occupations[0] <= 0:
                raise ValueError("Scan occupations must be positive and strictly increasing")
            return

        if self.grid[0] <= 0:
            raise ValueError("Occupation grid must be positive")
        if self.mode == FIXED_FIELD and not self.fixed_n:
            raise ValueError("fixed-field-occupation mode needs at least one fixed_n value")
        if self.mode == FIXED_ATOM and not self.fixed_m:
            raise ValueError("fixed-atom-occupation mode needs at least one fixed_m value")
        if any(v < 0 for v in self.fixed_n + self.fixed_m):
            raise ValueError("Fixed occupations must be nonnegative")

    @property
    def fixed_values(self) -> Tuple[Optional[float], ...]:
        if self.mode == FIXED_FIELD:
            return self.fixed_n
        if self.mode == FIXED_ATOM:
            return self.fixed_m
        return (None,)

    def to_config(self) -> dict:
        """JSON-ready mapping; ``core.forms.spec_from_config`` reads it back."""

        return {
            "mode": self.mode,
            "params": self.params.as_dict(),
            "grid": list(self.grid),
            "fixed_n": list(self.fixed_n),
            "fixed_m": list(self.fixed_m),
            "occupations": list(self.occupations),
            "freqs": self.freqs.as_dict(),
            "solver": self.solver.as_dict(),
            "fd_step": self.fd_step,
            "format": self.output_format,
            "out": self.output_path,
        }

    @classmethod
    def from_config(cls, data: dict) -> "SweepSpec":
        from ..forms import spec_from_config

        return spec_from_config(data)


@dataclass(frozen=True)
class OutputRecord:
    m_th: float
    n_th: float
    ea_over_omega0: float = float("nan")
    ef_over_nu: float = float("nan")
    e_int: float = float("nan")
    c_atom: float = float("nan")
    c_field: float = float("nan")
    n_fock_used: Optional[int] = None
    residual: float = float("nan")
    note: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.n_fock_used is None

    @classmethod
    def from_sample(cls, sample: ResponseSample) -> "OutputRecord":
        point = sample.point
        notes = []
        if sample.flagged:
            notes.append("finite-difference step not converged")
        if point.interaction_flagged:
            notes.append(f"interaction energy {point.e_int:.3e} above tolerance")
        return cls(
            m_th=point.m_th,
            n_th=point.n_th,
            ea_over_omega0=point.ea_over_omega0,
            ef_over_nu=point.ef_over_nu,
            e_int=point.e_int,
            c_atom=sample.c_atom,
            c_field=sample.c_field,
            n_fock_used=point.n_fock_used,
            residual=point.residual,
            note="; ".join(notes) or None,
        )

    def row(self) -> List[object]:
        return [getattr(self, column) for column in CSV_COLUMNS]


@dataclass(frozen=True)
class SweepTask:
    index: int
    occupation: float
    fixed: Optional[float]

    def occupations(self, mode: str) -> Tuple[float, float]:
        """(m_th, n_th) of this grid point."""

        if mode == FIXED_FIELD:
            return self.occupation, self.fixed
        if mode == FIXED_ATOM:
            return self.fixed, self.occupation
        return self.occupation, self.occupation


class SweepService:
    """Evaluate every point of a SweepSpec on a bounded thread pool."""

    def __init__(self, spec: SweepSpec, workers: Optional[int] = None) -> None:
        if spec.mode == KAPPA_SCAN:
            raise ValueError("Kappa scans run through kappa_threshold_scan")
        self.spec = spec
        self.workers = max(1, workers or settings.CBH_WORKERS)

    def tasks(self) -> List[SweepTask]:
        tasks = []
        for fixed in self.spec.fixed_values:
            for occupation in self.spec.grid:
                tasks.append(SweepTask(len(tasks), occupation, fixed))
        return tasks

    def evaluate(self, task: SweepTask) -> OutputRecord:
        spec = self.spec
        try:
            sample = response_sample(
                spec.params,
                task.occupation,
                mode=spec.mode,
                fixed=task.fixed or 0.0,
                freqs=spec.freqs,
                fd_step=spec.fd_step,
                config=spec.solver,
            )
        except POINT_ERRORS as exc:
            logger.exception("Sweep point %d (occupation %.4g) failed", task.index, task.occupation)
            m_th, n_th = task.occupations(spec.mode)
            return OutputRecord(m_th=m_th, n_th=n_th, note=f"error: {type(exc).__name__}: {exc}")
        return OutputRecord.from_sample(sample)

    def run(self, tasks: Optional[Sequence[SweepTask]] = None) -> List[OutputRecord]:
        """Records in task order, whatever order the pool finishes them in."""

        tasks = list(tasks if tasks is not None else self.tasks())
        records: List[Optional[OutputRecord]] = [None] * len(tasks)
        logger.info("Running %d %s points on %d workers", len(tasks), self.spec.mode, self.workers)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = {pool.submit(self.evaluate, task): position for position, task in enumerate(tasks)}
            for future in as_completed(futures):
                records[futures[future]] = future.result()

        failures = sum(record.failed for record in records)
        if records and failures == len(records):
            raise SweepError(f"All {failures} sweep points failed; first error: {records[0].note}")
        if failures:
            logger.warning("%d of %d sweep points failed", failures, len(records))
        return records

    def curves(self, records: Sequence[OutputRecord]) -> Dict[Optional[float], ResponseCurve]:
        """One ResponseCurve per fixed value, built from the successful rows."""

        spec = self.spec
        curves = {}
        for fixed in spec.fixed_values:
            samples = []
            for task, record in zip(self.tasks(), records):
                if task.fixed == fixed and not record.failed:
                    samples.append(ResponseSample(task.occupation, record.c_atom, record.c_field))

            def evaluate(occupation: float, fixed: Optional[float] = fixed) -> ResponseSample:
                return response_sample(
                    spec.params, occupation, spec.mode, fixed or 0.0, spec.freqs, spec.fd_step, spec.solver
                )

            curves[fixed] = ResponseCurve(
                mode=spec.mode, samples=samples, params=spec.params, fd_step=spec.fd_step, evaluator=evaluate
            )
        return curves


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> List[OutputRecord]:
    return SweepService(spec, workers).run()


# ----------------------------------------------------------------------
# κ threshold scan
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class KappaRow:
    g: float
    kappa: float
    cooling: Optional[bool]
    min_slope: float = float("nan")
    at_occupation: float = float("nan")
    note: Optional[str] = None


@dataclass(frozen=True)
class KappaThreshold:
    k: int
    # Coupling that attains the threshold.
    g: float
    threshold: float
    # "bracketed", "none" (no cooling anywhere) or "unbounded" (cooling at every κ).
    status: str
    rows: List[KappaRow] = field(default_factory=list)
    couplings: Tuple[float, ...] = ()

    @property
    def flagged(self) -> bool:
        return self.status != "bracketed"


def kappa_threshold_scan(
    k: int,
    couplings: Union[float, Sequence[float], None],
    kappas: Sequence[float],
    occupations: Sequence[float] = SCAN_OCCUPATIONS,
    config: Optional[SolverConfig] = None,
    workers: Optional[int] = None,
    tol: float = KAPPA_TOL,
    base: Optional[SystemParams] = None,
) -> KappaThreshold:
    """Largest κ/γ, over a set of couplings, at which the field energy still falls as m = n rises.

    A decrease of ⟨a†a⟩ between neighbouring occupations implies C_field < 0 in between.
    Each coupling is scanned over the κ grid and its last cooling/no-cooling pair is
    bisected down to ``tol``; κ values that fail to solve are skipped. ``couplings``
    defaults to DEFAULT_SCAN_COUPLINGS of the sideband order.
    """

    params = base or SystemParams(k=k, g=0.0, kappa=0.0)
    if params.k not in (1, 2):
        raise ValueError(f"Kappa scans need k in (1, 2), got {params.k}")
    if couplings is None:
        couplings = DEFAULT_SCAN_COUPLINGS[params.k]
    elif isinstance(couplings, (int, float)):
        couplings = (couplings,)
    couplings = tuple(float(g) for g in couplings)
    if not couplings or any(not math.isfinite(g) or g <= 0 for g in couplings):
        raise ValueError(f"Couplings must be a nonempty set of positive numbers, got {couplings}")
    grid = sorted(float(kappa) for kappa in kappas)
    limit = FIGURE_RANGE_MAX * params.gamma
    if not grid or grid[0] < 0 or grid[-1] > limit:
        raise ValueError(f"Kappa grid must be nonempty and lie within [0, {limit:g}]")
    config = config or SolverConfig.from_settings()
    workers = max(1, workers or settings.CBH_WORKERS)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = [
            _threshold_for_coupling(replace(params, g=g), grid, occupations, config, pool, tol) for g in couplings
        ]

    rows = sorted((row for result in results for row in result.rows), key=lambda row: (row.g, row.kappa))
    found = [result for result in results if result.status != "none"]
    if not found:
        logger.info("No bosonic cooling region for k=%d at g in %s on the κ grid", params.k, couplings)
        return KappaThreshold(params.k, couplings[0], 0.0, "none", rows, couplings)
    best = max(found, key=lambda result: result.threshold)
    logger.info("k=%d kappa threshold %.4f attained at g=%.4g (%s)", params.k, best.threshold, best.g, best.status)
    return KappaThreshold(params.k, best.g, best.threshold, best.status, rows, couplings)


def _threshold_for_coupling(
    params: SystemParams,
    grid: Sequence[float],
    occupations: Sequence[float],
    config: SolverConfig,
    pool: ThreadPoolExecutor,
    tol: float,
) -> KappaThreshold:
    def probe(kappa: float) -> KappaRow:
        return _field_cooling(params.with_kappa(kappa), occupations, config, pool)

    rows = [probe(kappa) for kappa in grid]
    cooling = [row for row in rows if row.cooling is not None]
    if not any(row.cooling for row in cooling):
        return KappaThreshold(params.k, params.g, 0.0, "none", rows)

    last = max(i for i, row in enumerate(cooling) if row.cooling)
    if last == len(cooling) - 1:
        return KappaThreshold(params.k, params.g, cooling[last].kappa, "unbounded", rows)

    lo, hi = cooling[last].kappa, cooling[last + 1].kappa
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        row = probe(mid)
        if row.cooling is None:
            break
        rows.append(row)
        if row.cooling:
            lo = mid
        else:
            hi = mid
    return KappaThreshold(params.k, params.g, 0.5 * (lo + hi), "bracketed", rows)


def _field_cooling(
    params: SystemParams,
    occupations: Sequence[float],
    config: SolverConfig,
    pool: ThreadPoolExecutor,
) -> KappaRow:
    def field_energy(occupation: float) -> float:
        return steady_point(params.with_occupations(m_th=occupation, n_th=occupation), config).ef_over_nu

    xs = np.asarray(occupations, dtype=float)
    try:
        energies = np.array(list(pool.map(field_energy, xs)))
    except POINT_ERRORS as exc:
        logger.exception("Kappa %.4g skipped", params.kappa)
        return KappaRow(params.g, params.kappa, None, note=f"error: {type(exc).__name__}: {exc}")

    slopes = np.diff(energies) / np.diff(xs)
    lowest = int(np.argmin(slopes))
    return KappaRow(
        g=params.g,
        kappa=params.kappa,
        cooling=bool(slopes[lowest] < -COOLING_SLOPE_TOL),
        min_slope=float(slopes[lowest]),
        at_occupation=float(0.5 * (xs[lowest] + xs[lowest + 1])),
    )


# ----------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------

def format_number(value: object) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.14e}"


def _timestamp() -> str:
    return timezone.now().isoformat(timespec="seconds")


def write_csv(records: Iterable[OutputRecord], stream: TextIO, timestamp: bool = True) -> None:
    """Header row, one row per record, then ``# row i: note`` lines and the timestamp."""

    records = list(records)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow([format_number(value) for value in record.row()])
    for index, record in enumerate(records):
        if record.note:
            stream.write(f"# row {index}: {record.note}\n")
    if timestamp:
        stream.write(f"# generated {_timestamp()}\n")


def write_json(records: Iterable[OutputRecord], stream: TextIO, timestamp: bool = True) -> None:
    rows = []
    for record in records:
        row = {}
        for column in CSV_COLUMNS:
            value = getattr(record, column)
            row[column] = None if isinstance(value, float) and not math.isfinite(value) else value
        row["note"] = record.note
        rows.append(row)
    document = {"columns": list(CSV_COLUMNS), "records": rows}
    if timestamp:
        document["generated"] = _timestamp()
    stream.write(json.dumps(document, indent=2, ensure_ascii=False))
    stream.write("\n")


def render_records(records: Iterable[OutputRecord], output_format: str = "csv", timestamp: bool = True) -> str:
    buffer = io.StringIO()
    if output_format == "csv":
        write_csv(records, buffer, timestamp)
    elif output_format == "json":
        write_json(records, buffer, timestamp)
    else:
        raise ValueError(f"format must be one of {OUTPUT_FORMATS}, got {output_format!r}")
    return buffer.getvalue()


def write_kappa_csv(result: KappaThreshold, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(KAPPA_COLUMNS)
    for row in result.rows:
        cooling = "nan" if row.cooling is None else str(int(row.cooling))
        writer.writerow(
            (
                format_number(row.g),
                format_number(row.kappa),
                cooling,
                format_number(row.min_slope),
                format_number(row.at_occupation),
            )
        )
    couplings = ",".join(f"{g:g}" for g in result.couplings or (result.g,))
    stream.write(
        f"# k={result.k} g={result.g:g} threshold={result.threshold:.4f} status={result.status} couplings={couplings}\n"
    )


def read_csv_records(stream: TextIO) -> List[OutputRecord]:
    """Parse rows written by write_csv; trailing notes are reattached to their rows."""

    lines = stream.read().splitlines()
    notes: Dict[int, str] = {}
    data = []
    for line in lines:
        if line.startswith("# row "):
            index, _, note = line[len("# row "):].partition(": ")
            notes[int(index)] = note
        elif line and not line.startswith("#"):
            data.append(line)
    reader = csv.DictReader(data)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"Unexpected CSV header {reader.fieldnames}")
    records = []
    for index, row in enumerate(reader):
        values = {column: float(row[column]) for column in CSV_COLUMNS if column != "n_fock_used"}
        cutoff = row["n_fock_used"]
        values["n_fock_used"] = None if cutoff == "nan" else int(cutoff)
        records.append(OutputRecord(note=notes.get(index), **values))
    return records


# ----------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------

def preset_names() -> List[str]:
    return list(_presets())


def preset_config(name: str) -> dict:
    """Resolve a named preset into a plain sweep configuration mapping.

    Lamb-Dicke presets get g from the coupling of their sideband order; presets in
    physical units are reduced by γ.
    """

    presets = _presets()
    if name not in presets:
        raise ValueError(f"Unknown preset {name!r}; choose from {sorted(presets)}")
    preset = json.loads(json.dumps(presets[name]))
    params = preset.setdefault("params", {})

    lamb_dicke = preset.pop("lamb_dicke", None)
    if lamb_dicke is not None:
        couplings = lamb_dicke_couplings(lamb_dicke["rabi_frequency"], lamb_dicke["eta"])
        params["g"] = couplings[params["k"]]

    physical = preset.pop("physical_rates", None)
    if physical is not None:
        gamma = physical["gamma"]
        params["g"] = rates_to_reduced(physical["g"], gamma)
        params["kappa"] = rates_to_reduced(physical["kappa"], gamma)
    return preset


def spec_from_preset(name: str, **overrides) -> SweepSpec:
    """SweepSpec of a preset, with top-level config keys (grid, format, out …) overridden."""

    from ..forms import spec_from_config

    config = preset_config(name)
    check_range = config.pop("check_range", False)
    config.update({key: value for key, value in overrides.items() if value is not None})
    spec = spec_from_config(config)
    if check_range:
        spec.params.check_figure_range()
    return spec


def _presets() -> dict:
    _project_root = Path(__file__).resolve().parent.parent.parent.parent
    if str(_project_root) not in sys.path:
        sys.path.insert(0, str(_project_root))

    from presets.presets import PRESETS

    return PRESETS
