"""Fidelity, truth tables and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .hamiltonian import PhysicalParams, default_params
from .hilbert import SystemLayout, basis_state, product_labels
from .lindblad import IntegrationError, IntegratorOptions, NoiseModel, density_matrix, integrate
from .schedule import apply_time_error, compile_nqubit

NS = 1e-9
# noisy runs use n_max = 2: the n_max = 1 result moves by ~3e-3, above the 2e-3 convergence bar
NOISY_PHOTON_CUTOFF = 2
DEFAULT_DT_GRID = tuple(np.round(np.arange(-5, 6) * NS, 15))
DEFAULT_C_GRID = tuple(np.round(0.95 + 0.01 * np.arange(11), 10))
CSV_COLUMNS = ("dt_ns", "c", "fidelity", "runtime_s")


def computational_states(layout: SystemLayout) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """``(bits, state)`` for every computational basis input, ancilla and cavities empty."""
    n = layout.work_qutrit_count
    return [
        (bits, basis_state(product_labels(layout, bits), layout))
        for bits in itertools.product((0, 1), repeat=n)
    ]


def gate_input_state(layout: SystemLayout) -> np.ndarray:
    """Equal superposition of all computational basis states with ancilla |0> and vacuum."""
    if layout.work_qutrit_count != 3:
        raise ValueError("the benchmark input is defined for three work qutrits")
    return equal_superposition(layout)


def equal_superposition(layout: SystemLayout) -> np.ndarray:
    psi = sum(s for _, s in computational_states(layout))
    return psi / np.linalg.norm(psi)


def _computational_mask(layout: SystemLayout) -> tuple[np.ndarray, int]:
    idx = np.array([layout.index(product_labels(layout, b)) for b, _ in computational_states(layout)])
    ones = layout.index(product_labels(layout, (1,) * layout.work_qutrit_count))
    return idx, ones


def ideal_output_state(psi: np.ndarray, layout: SystemLayout, atol: float = 1e-12) -> np.ndarray:
    """Apply the controlled-phase gate: flip the sign of the all-ones component."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (layout.total_dim,):
        raise ValueError(f"state dim {psi.shape} does not match layout dim {layout.total_dim}")
    idx, ones = _computational_mask(layout)
    outside = psi.copy()
    outside[idx] = 0
    if np.max(np.abs(outside)) > atol:
        raise ValueError("state has support outside the computational subspace")
    out = psi.copy()
    out[ones] = -out[ones]
    return out


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """``sqrt(<psi| rho |psi>)`` clamped to ``[0, 1]``."""
    rho = np.asarray(rho)
    psi = np.asarray(psi)
    if rho.shape != (psi.shape[0], psi.shape[0]):
        raise ValueError(f"shape mismatch: rho {rho.shape}, psi {psi.shape}")
    val = float(np.real(np.vdot(psi, rho @ psi)))
    return float(np.sqrt(min(max(val, 0.0), 1.0)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum())


@dataclass(frozen=True)
class TruthRow:
    bits: tuple[int, ...]
    output_bits: tuple[int, ...]
    coefficient: complex
    leakage: float


def truth_table(
    gate_applier: Callable[[np.ndarray], np.ndarray], layout: SystemLayout
) -> list[TruthRow]:
    """Feed each computational basis state through ``gate_applier``.

    Each row reports the computational output carrying the largest weight
    (the input itself for diagonal gates), its coefficient, and the norm of
    everything else.
    """
    states = computational_states(layout)
    rows = []
    for bits, psi in states:
        out = gate_applier(psi)
        overlaps = [(b, np.vdot(s, out)) for b, s in states]
        b_out, coef = max(overlaps, key=lambda bc: abs(bc[1]))
        rest = out - coef * basis_state(product_labels(layout, b_out), layout)
        rows.append(TruthRow(bits, b_out, complex(coef), float(np.linalg.norm(rest))))
    return rows


def expected_phase(bits: Sequence[int]) -> int:
    return -1 if all(bits) else 1


def truth_table_errors(rows: Sequence[TruthRow]) -> tuple[float, float]:
    """Largest controlled-phase coefficient error and largest leakage."""
    err = max(
        abs(r.coefficient - expected_phase(r.bits)) if r.output_bits == r.bits else 2.0 for r in rows
    )
    return float(err), float(max(r.leakage for r in rows))


# ---------------------------------------------------------------------------
# noisy runs


def simulate_gate(
    params: PhysicalParams,
    *,
    dt: float = 0.0,
    photon_cutoff: int = NOISY_PHOTON_CUTOFF,
    opts: IntegratorOptions | None = None,
    modified: bool = True,
    noise: NoiseModel | None = None,
) -> tuple[float, "object"]:
    """One noisy controlled-phase run from the equal-superposition input.

    Returns the fidelity against the ideal output and the integration result.
    """
    n = params.n_qutrits
    sched = compile_nqubit(n, params, photon_cutoff)
    sched = apply_time_error(sched, dt)
    if modified:
        sched = sched.as_modified()
    layout = sched.layout
    psi = equal_superposition(layout)
    target = ideal_output_state(psi, layout)
    res = integrate(density_matrix(psi), sched, noise, opts)
    return fidelity(res.rho, target), res


@dataclass
class SweepResult:
    """Fidelity on a grid of ``(dt, c)`` points, in row-major grid order."""

    dt: np.ndarray
    c: np.ndarray
    fidelity: np.ndarray
    runtime: np.ndarray
    errors: list[str | None] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.fidelity)

    def rows(self):
        return zip(self.dt, self.c, self.fidelity, self.runtime)

    def min_fidelity(self, mask: np.ndarray | None = None) -> float:
        f = self.fidelity if mask is None else self.fidelity[mask]
        return float(np.min(f)) if len(f) else float("nan")

    def write_csv(self, out: str | Path | TextIO, header_lines: Sequence[str] = ()) -> None:
        close = isinstance(out, (str, Path))
        fh = open(out, "w", newline="") if close else out
        try:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for dt, c, f, rt in self.rows():
                w.writerow([_fmt(dt / NS, 6), _fmt(c, 6), _fmt(f, 10), _fmt(rt, 3)])
        finally:
            if close:
                fh.close()

    def to_dict(self) -> dict:
        return {
            "columns": list(CSV_COLUMNS),
            "rows": [
                [float(dt / NS), float(c), _json_float(f), float(rt)] for dt, c, f, rt in self.rows()
            ],
            "errors": list(self.errors),
            "meta": self.meta,
        }

    def write_json(self, out: str | Path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "SweepResult":
        lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
        reader = csv.DictReader(lines)
        rows = list(reader)
        arr = lambda key: np.array([float(r[key]) for r in rows])
        return cls(arr("dt_ns") * NS, arr("c"), arr("fidelity"), arr("runtime_s"), [None] * len(rows))


def _fmt(x: float, digits: int) -> str:
    if not np.isfinite(x):
        return "nan"
    return f"{x:.{digits}f}"


def _json_float(x: float):
    return float(x) if np.isfinite(x) else None


def _run_point(args) -> tuple[float, float, str | None]:
    params, dt, c, photon_cutoff, opts = args
    start = time.perf_counter()
    try:
        f, _ = simulate_gate(params.with_coupling_ratio(c), dt=dt, photon_cutoff=photon_cutoff, opts=opts)
        err = None
    except (IntegrationError, ValueError, FloatingPointError) as exc:
        f, err = float("nan"), f"{type(exc).__name__}: {exc}"
    return f, time.perf_counter() - start, err


def run_grid(
    points: Sequence[tuple[float, float]],
    params: PhysicalParams | None = None,
    *,
    photon_cutoff: int = NOISY_PHOTON_CUTOFF,
    opts: IntegratorOptions | None = None,
    jobs: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> SweepResult:
    """Evaluate the gate fidelity at each ``(dt, c)`` point; failures become NaN."""
    params = default_params(3) if params is None else params
    opts = opts or IntegratorOptions()
    tasks = [(params, float(dt), float(c), photon_cutoff, opts) for dt, c in points]
    results: list = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, r in enumerate(pool.map(_run_point, tasks)):
                results.append(r)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, t in enumerate(tasks):
            results.append(_run_point(t))
            if progress:
                progress(i + 1, len(tasks))
    dts = np.array([t[1] for t in tasks], dtype=float)
    cs = np.array([t[2] for t in tasks], dtype=float)
    fids = np.array([r[0] for r in results], dtype=float)
    rts = np.array([r[1] for r in results], dtype=float)
    meta = {"photon_cutoff": photon_cutoff, "integrator": opts.to_dict(), "params": params.to_dict()}
    return SweepResult(dts, cs, fids, rts, [r[2] for r in results], meta)


def sweep_dt(dt_grid: Sequence[float] = DEFAULT_DT_GRID, params: PhysicalParams | None = None, **kw) -> SweepResult:
    """Fidelity versus interaction-time error at ``c = 1``."""
    return run_grid([(dt, 1.0) for dt in dt_grid], params, **kw)


def sweep_c(c_grid: Sequence[float] = DEFAULT_C_GRID, params: PhysicalParams | None = None, **kw) -> SweepResult:
    """Fidelity versus coupling ratio ``c = mu / g`` at ``dt = 0``."""
    for c in c_grid:
        if not c > 0:
            raise ValueError(f"coupling ratio must be > 0, got {c}")
    return run_grid([(0.0, c) for c in c_grid], params, **kw)


def sweep_2d(
    dt_grid: Sequence[float] = DEFAULT_DT_GRID,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    params: PhysicalParams | None = None,
    **kw,
) -> SweepResult:
    """Cross product of the two grids, ``dt`` varying slowest."""
    return run_grid([(dt, c) for dt in dt_grid for c in c_grid], params, **kw)


def fig10_mask(result: SweepResult, dt_max: float = 3 * NS, c_lo: float = 0.97, c_hi: float = 1.03) -> np.ndarray:
    tol = 1e-12
    return (np.abs(result.dt) <= dt_max + tol) & (result.c >= c_lo - tol) & (result.c <= c_hi + tol)


@dataclass(frozen=True)
class ConvergenceReport:
    fidelity_low: float
    fidelity_high: float
    cutoff_low: int
    cutoff_high: int

    @property
    def delta(self) -> float:
        return abs(self.fidelity_high - self.fidelity_low)


def convergence_check(
    params: PhysicalParams | None = None,
    opts: IntegratorOptions | None = None,
    cutoffs: tuple[int, int] = (1, 2),
) -> ConvergenceReport:
    """Gate fidelity at two photon cutoffs for the default operating point."""
    params = default_params(3) if params is None else params
    lo, _ = simulate_gate(params, photon_cutoff=cutoffs[0], opts=opts)
    hi, _ = simulate_gate(params, photon_cutoff=cutoffs[1], opts=opts)
    return ConvergenceReport(lo, hi, cutoffs[0], cutoffs[1])


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)
