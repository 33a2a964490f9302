"""Master-equation integration over a compiled schedule.

Every cavity loses photons at ``kappa``.  Each work qutrit and the ancilla
relax along 2->1, 2->0 and 1->0 and dephase in projector form on levels |1>
and |2>.  Every ``L^+ L`` is diagonal in the product basis, so
the anticommutator part reduces to an elementwise decay mask and the sandwich
terms to a handful of block copies on the reshaped density tensor.

Three integrators share that dissipator:

``split`` (default)
    Inside one segment the Hamiltonian is ``H(t) = exp(i H0 t) V exp(-i H0 t)``
    for a diagonal ``H0`` built from local detunings (see
    :func:`~cavitygate.hamiltonian.frame_energies`).  In the frame rotating with
    ``H0`` the coherent generator ``H0 + V`` is constant and is exponentiated
    exactly on the few subsystems it touches.  The jump operators are
    eigenoperators of ``H0``, so the dissipator is unchanged by the frame, and a
    symmetric (Strang) split alternates dissipative and coherent steps.  Step
    size is bounded only by the slow dissipative rates.
``rk4``
    Classic fixed-step Runge-Kutta in the lab interaction picture, rebuilding
    ``H(t)`` from the Hamiltonian factories at every stage.  Slow, but shares no
    code with the frame construction, which makes it the reference.
``adaptive``
    ``scipy.integrate.solve_ivp`` on the same right-hand side.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .hamiltonian import (
    RATE_FIELDS,
    HamiltonianSpec,
    PhysicalParams,
    frame_energies,
)
from .hilbert import ANCILLA, SystemLayout, annihilation_op, embed, transition_op
from .schedule import GateSchedule, ScheduleSegment

METHODS = ("split", "rk4", "adaptive")
CLOCKS = ("global", "segment")
SPLIT_DEFAULT_STEP = 2e-9


class IntegrationError(RuntimeError):
    """The integration left the space of valid density matrices."""


@dataclass(frozen=True)
class NoiseModel:
    """Decoherence rates in 1/s.

    Qutrit-rate tuples hold one entry per work qutrit followed by the ancilla;
    ``kappa`` holds one entry per cavity.
    """

    gamma01: tuple[float, ...]
    gamma12: tuple[float, ...]
    gamma02: tuple[float, ...]
    gamma1phi: tuple[float, ...]
    gamma2phi: tuple[float, ...]
    kappa: tuple[float, ...]

    def __post_init__(self):
        for f in fields(self):
            vals = tuple(float(v) for v in getattr(self, f.name))
            if any(not np.isfinite(v) or v < 0 for v in vals):
                raise ValueError(f"{f.name}: rates must be finite and >= 0, got {vals}")
            object.__setattr__(self, f.name, vals)
        lens = {len(getattr(self, name)) for name in RATE_FIELDS}
        if len(lens) != 1:
            raise ValueError("all qutrit rate tuples must have the same length")

    @classmethod
    def from_params(cls, params: PhysicalParams) -> "NoiseModel":
        return cls(*(getattr(params, name) for name in RATE_FIELDS), kappa=params.kappa)

    @classmethod
    def zero(cls, layout: SystemLayout) -> "NoiseModel":
        q = (0.0,) * (layout.work_qutrit_count + 1)
        return cls(q, q, q, q, q, (0.0,) * layout.cavity_count)

    @property
    def is_zero(self) -> bool:
        return not any(any(getattr(self, f.name)) for f in fields(self))

    def check_layout(self, layout: SystemLayout) -> None:
        if len(self.gamma01) != layout.work_qutrit_count + 1 or len(self.kappa) != layout.cavity_count:
            raise ValueError("noise model does not match the layout")

    def qutrit_rates(self, layout: SystemLayout, subsystem: str) -> dict[str, float]:
        i = layout.work_qutrit_count if subsystem == ANCILLA else int(subsystem[1:]) - 1
        return {name: getattr(self, name)[i] for name in RATE_FIELDS}

    def jump_operators(self, layout: SystemLayout) -> list[tuple[float, sp.csr_matrix]]:
        """``(rate, operator)`` pairs for the generic dissipator; zero rates dropped."""
        self.check_layout(layout)
        out = []
        for s in layout.subsystems:
            if s.startswith("c"):
                k = self.kappa[int(s[1:]) - 1]
                if k:
                    out.append((k, embed(annihilation_op(layout.photon_cutoff), s, layout)))
                continue
            r = self.qutrit_rates(layout, s)
            for name, (i, j) in (("gamma01", (0, 1)), ("gamma12", (1, 2)), ("gamma02", (0, 2)),
                                 ("gamma1phi", (1, 1)), ("gamma2phi", (2, 2))):
                if r[name]:
                    out.append((r[name], embed(transition_op(i, j), s, layout)))
        return out


def dissipator(op: sp.spmatrix | np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``L rho L^+ - (L^+ L rho + rho L^+ L) / 2``."""
    rho = np.asarray(rho)
    if op.shape[0] != op.shape[1] or op.shape[1] != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"shape mismatch: operator {op.shape}, density matrix {rho.shape}")
    opd = op.conj().T
    lrl = op @ (op @ rho.conj().T).conj().T if sp.issparse(op) else op @ rho @ opd
    ldl = opd @ op
    left = ldl @ rho
    right = (ldl @ rho.conj().T).conj().T if sp.issparse(op) else rho @ ldl
    return np.asarray(lrl - 0.5 * (left + right))


# ---------------------------------------------------------------------------
# fast structured dissipator


def _local_decay(layout: SystemLayout, noise: NoiseModel, s: str) -> np.ndarray:
    """Diagonal of ``sum rate * L^+ L`` restricted to subsystem ``s``."""
    if s.startswith("c"):
        return noise.kappa[int(s[1:]) - 1] * np.arange(layout.photon_cutoff + 1, dtype=float)
    r = noise.qutrit_rates(layout, s)
    return np.array([0.0, r["gamma01"] + r["gamma1phi"], r["gamma12"] + r["gamma02"] + r["gamma2phi"]])


def _kron_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros(1)
    for p in parts:
        out = (out[:, None] + p[None, :]).reshape(-1)
    return out


class _StructuredDissipator:
    """Dissipator acting on a density tensor with permuted ket and bra axes.

    ``ket_order`` and ``bra_order`` list subsystem names in the order their
    axes appear in the tensor (ket axes first, then bra axes).
    """

    def __init__(self, layout: SystemLayout, noise: NoiseModel, ket_order, bra_order):
        noise.check_layout(layout)
        self.shape = tuple(layout.local_dim(s) for s in ket_order) + tuple(layout.local_dim(s) for s in bra_order)
        nk = len(ket_order)
        gk = _kron_sum([_local_decay(layout, noise, s) for s in ket_order])
        gb = _kron_sum([_local_decay(layout, noise, s) for s in bra_order])
        self.decay = (-0.5 * (gk[:, None] + gb[None, :])).reshape(self.shape)
        self.jumps: list[tuple[tuple, tuple, float]] = []
        ndim = len(self.shape)

        def idx(ka: int, ba: int, i: int, j: int) -> tuple:
            out = [slice(None)] * ndim
            out[ka], out[ba] = i, j
            return tuple(out)

        for s in layout.subsystems:
            ka, ba = ket_order.index(s), nk + bra_order.index(s)
            if s.startswith("c"):
                k = noise.kappa[int(s[1:]) - 1]
                if k:
                    for n in range(layout.photon_cutoff):
                        for m in range(layout.photon_cutoff):
                            rate = k * np.sqrt((n + 1) * (m + 1))
                            self.jumps.append((idx(ka, ba, n, m), idx(ka, ba, n + 1, m + 1), rate))
                continue
            r = noise.qutrit_rates(layout, s)
            for (dst, src), rate in (
                ((0, 1), r["gamma01"]),
                ((0, 2), r["gamma02"]),
                ((1, 2), r["gamma12"]),
                ((1, 1), r["gamma1phi"]),
                ((2, 2), r["gamma2phi"]),
            ):
                if rate:
                    self.jumps.append((idx(ka, ba, dst, dst), idx(ka, ba, src, src), rate))
        self.active = bool(self.jumps) or bool(np.any(self.decay))

        self._decay_cache: dict[float, np.ndarray] = {}

    def jump(self, rho: np.ndarray) -> np.ndarray:
        """Sandwich terms ``sum rate * L rho L^+`` only."""
        out = np.zeros_like(rho)
        for dst, src, rate in self.jumps:
            out[dst] += rate * rho[src]
        return out

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self.decay * rho + self.jump(rho)

    def step(self, rho: np.ndarray, h: float) -> np.ndarray:
        """Advance the purely dissipative flow by ``h``.

        Symmetric split of the diagonal decay (exact exponential) around a
        second-order series in the jump terms; the local error is third order
        in ``rate * h``, which is below 1e-10 for nanosecond steps.
        """
        if not self.active or h == 0:
            return rho
        half = self._decay_cache.get(h)
        if half is None:
            half = np.exp(0.5 * h * self.decay)
            if len(self._decay_cache) < 4:
                self._decay_cache[h] = half
        x = half * rho
        if self.jumps:
            j1 = self.jump(x)
            x = x + h * j1 + (0.5 * h * h) * self.jump(j1)
        return half * x


# ---------------------------------------------------------------------------
# options / results


@dataclass(frozen=True)
class IntegratorOptions:
    """Integrator controls.

    Args:
        method: ``"split"``, ``"rk4"`` or ``"adaptive"``.
        max_step: upper bound on the step in seconds.  ``None`` picks 2 ns for
            ``split`` and the phase rule below for ``rk4``.
        max_phase: largest phase (rad) the fastest rate in the generator may
            advance per ``rk4`` step; the step is also capped at 1/100 of the
            segment.
        rtol, atol: tolerances for ``adaptive``.
        clock: ``"global"`` keeps the interaction-picture phases running on
            the protocol clock; ``"segment"`` restarts them at every segment.
        trace_tol: abort threshold for ``|tr rho - 1|``.
        check_positivity: compute the smallest eigenvalue of the final state.
    """

    method: str = "split"
    max_step: float | None = None
    max_phase: float = 2 * np.pi / 20
    rtol: float = 1e-8
    atol: float = 1e-10
    clock: str = "global"
    trace_tol: float = 1e-6
    check_positivity: bool = True
    positivity_tol: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}, got {self.clock!r}")
        for name in ("max_phase", "rtol", "atol", "trace_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be > 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SegmentSnapshot:
    index: int
    label: str
    t_end: float
    trace: float
    purity: float
    fidelity: float = float("nan")


@dataclass
class IntegrationResult:
    rho: np.ndarray
    snapshots: list[SegmentSnapshot] = field(default_factory=list)
    steps: int = 0
    wall_time: float = 0.0
    min_eigenvalue: float = float("nan")


SNAPSHOT_COLUMNS = ("index", "label", "t_end_ns", "trace", "purity", "fidelity")


def write_snapshots_csv(snapshots: Iterable[SegmentSnapshot], out: str | Path | TextIO) -> None:
    close = False
    if isinstance(out, (str, Path)):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for s in snapshots:
            w.writerow([s.index, s.label, f"{s.t_end * 1e9:.6f}", f"{s.trace:.12f}", f"{s.purity:.12f}", f"{s.fidelity:.12f}"])
    finally:
        if close:
            out.close()


# ---------------------------------------------------------------------------
# lab-picture right-hand side


def lindblad_rhs(
    rho: np.ndarray,
    t: float,
    segment: ScheduleSegment,
    noise: NoiseModel,
    params: PhysicalParams,
    layout: SystemLayout,
    clock_origin: float = 0.0,
) -> np.ndarray:
    """``d rho / dt`` with the segment's Hamiltonian evaluated at ``t - clock_origin``."""
    rho = np.asarray(rho, dtype=complex)
    d = layout.total_dim
    if rho.shape != (d, d):
        raise ValueError(f"density matrix shape {rho.shape} does not match layout dim {d}")
    h = segment.hamiltonian.build(params, layout, t - clock_origin)
    diss = _StructuredDissipator(layout, noise, layout.subsystems, layout.subsystems)
    return _rhs(rho, h, diss, layout)


def _rhs(rho: np.ndarray, h: sp.csr_matrix, diss: _StructuredDissipator, layout: SystemLayout) -> np.ndarray:
    hr = h @ rho
    out = -1j * (hr - hr.conj().T)
    if diss.active:
        out += diss(rho.reshape(layout.dims * 2)).reshape(rho.shape)
    return out


def _rk4_step_size(seg: ScheduleSegment, params: PhysicalParams, layout: SystemLayout, opts: IntegratorOptions) -> float:
    energies = frame_energies(seg.hamiltonian, params, layout)
    spread = [float(np.ptp(e)) for e in energies.values()] or [0.0]
    rowsum = np.asarray(abs(seg.hamiltonian.build(params, layout, 0.0)).sum(axis=1)).ravel()
    fast = max(sum(spread), float(rowsum.max()) if rowsum.size else 0.0)
    h = seg.duration / 100
    if fast > 0:
        h = min(h, opts.max_phase / fast)
    if opts.max_step is not None:
        h = min(h, opts.max_step)
    return h


def _evolve_rk4(rho, seg, t0, noise, params, layout, opts, diss):
    origin = 0.0 if opts.clock == "global" else t0
    h_max = _rk4_step_size(seg, params, layout, opts)
    nsteps = max(1, int(np.ceil(seg.duration / h_max - 1e-9)))
    h = seg.duration / nsteps
    spec = seg.hamiltonian
    build = lambda t: spec.build(params, layout, t - origin)
    t = t0
    for _ in range(nsteps):
        k1 = _rhs(rho, build(t), diss, layout)
        hm = build(t + 0.5 * h)
        k2 = _rhs(rho + 0.5 * h * k1, hm, diss, layout)
        k3 = _rhs(rho + 0.5 * h * k2, hm, diss, layout)
        k4 = _rhs(rho + h * k3, build(t + h), diss, layout)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return rho, nsteps


def _evolve_adaptive(rho, seg, t0, noise, params, layout, opts, diss):
    origin = 0.0 if opts.clock == "global" else t0
    spec = seg.hamiltonian
    d = layout.total_dim
    counter = {"n": 0}

    def f(t, y):
        counter["n"] += 1
        r = y.reshape(d, d)
        return _rhs(r, spec.build(params, layout, t - origin), diss, layout).reshape(-1)

    kwargs = {}
    if opts.max_step is not None:
        kwargs["max_step"] = opts.max_step
    sol = solve_ivp(f, (t0, t0 + seg.duration), rho.reshape(-1), method="DOP853",
                    rtol=opts.rtol, atol=opts.atol, **kwargs)
    if not sol.success:
        raise IntegrationError(f"adaptive integrator failed in {seg.label}: {sol.message}")
    return sol.y[:, -1].reshape(d, d), counter["n"]


# ---------------------------------------------------------------------------
# rotating-frame split integrator


def _active_block(v: sp.csr_matrix, layout: SystemLayout, active: Sequence[str]) -> np.ndarray:
    """Dense restriction of ``v = V_active (x) 1`` to the active subsystems."""
    grids = np.meshgrid(*[np.arange(layout.local_dim(s)) for s in active], indexing="ij")
    idx = np.zeros(grids[0].size if grids else 1, dtype=np.int64)
    for s, g in zip(active, grids):
        idx += g.reshape(-1) * layout.strides[layout.axis(s)]
    return v[idx][:, idx].toarray()


class _SplitSegment:
    def __init__(self, seg, params, layout, noise, opts):
        self.layout = layout
        spec: HamiltonianSpec = seg.hamiltonian
        energies = frame_energies(spec, params, layout)
        self.active = [s for s in layout.subsystems if s in energies]
        rest = [s for s in layout.subsystems if s not in energies]
        self.ket_order = self.active + rest
        self.bra_order = rest + self.active
        self.adim = int(np.prod([layout.local_dim(s) for s in self.active])) if self.active else 1
        self.e_active = _kron_sum([energies[s] for s in self.active]) if self.active else np.zeros(1)
        if self.active:
            v = _active_block(spec.build(params, layout, 0.0), layout, self.active)
            w, vecs = sla.eigh(np.diag(self.e_active) + 0.5 * (v + v.conj().T))
            self.w, self.vecs = w, vecs
        self.diss = _StructuredDissipator(layout, noise, self.ket_order, self.bra_order)
        ncan = len(layout.subsystems)
        perm_k = [layout.axis(s) for s in self.ket_order]
        perm_b = [ncan + layout.axis(s) for s in self.bra_order]
        self.perm = perm_k + perm_b
        self.inv = list(np.argsort(self.perm))

    def to_tensor(self, rho: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(rho.reshape(self.layout.dims * 2).transpose(self.perm))

    def from_tensor(self, t: np.ndarray) -> np.ndarray:
        d = self.layout.total_dim
        return np.ascontiguousarray(t.transpose(self.inv)).reshape(d, d)

    def frame(self, t: np.ndarray, tau: float, sign: float) -> np.ndarray:
        """Multiply by ``exp(-sign i H0 tau)`` on the ket and its inverse on the bra."""
        if not self.active or not np.any(self.e_active) or tau == 0:
            return t
        ph = np.exp(-1j * sign * self.e_active * tau)
        shape = t.shape
        m = t.reshape(self.adim, -1, self.adim)
        m = m * ph[:, None, None] * ph.conj()[None, None, :]
        return m.reshape(shape)

    def unitary(self, h: float) -> np.ndarray:
        return (self.vecs * np.exp(-1j * self.w * h)) @ self.vecs.conj().T

    def coherent(self, t: np.ndarray, u: np.ndarray) -> np.ndarray:
        if not self.active:
            return t
        shape = t.shape
        a = self.adim
        m = (u @ t.reshape(a, -1)).reshape(-1, a)
        m = m @ u.conj().T
        return m.reshape(shape)


def _evolve_split(rho, seg, t0, noise, params, layout, opts):
    h_max = SPLIT_DEFAULT_STEP if opts.max_step is None else opts.max_step
    nsteps = max(1, int(np.ceil(seg.duration / h_max - 1e-9)))
    h = seg.duration / nsteps
    ss = _SplitSegment(seg, params, layout, noise, opts)
    origin = 0.0 if opts.clock == "global" else t0
    t = ss.to_tensor(rho)
    t = ss.frame(t, t0 - origin, +1.0)
    if ss.active:
        u = ss.unitary(h)
        diss = ss.diss
        if diss.active:
            t = diss.step(t, 0.5 * h)
            for i in range(nsteps):
                t = ss.coherent(t, u)
                t = diss.step(t, h if i < nsteps - 1 else 0.5 * h)
        else:
            t = ss.coherent(t, np.linalg.matrix_power(u, nsteps) if nsteps < 64 else ss.unitary(seg.duration))
    else:
        t = ss.diss.step(t, h) if nsteps == 1 else _repeat(ss.diss.step, t, h, nsteps)
    t = ss.frame(t, t0 + seg.duration - origin, -1.0)
    return ss.from_tensor(t), nsteps


def _repeat(fn, t, h, n):
    for _ in range(n):
        t = fn(t, h)
    return t


# ---------------------------------------------------------------------------


def density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def integrate(
    rho0: np.ndarray,
    schedule: GateSchedule,
    noise: NoiseModel | None = None,
    opts: IntegratorOptions | None = None,
    *,
    references: Sequence[np.ndarray | None] | None = None,
    snapshot_csv: str | Path | TextIO | None = None,
) -> IntegrationResult:
    """Evolve ``rho0`` through every segment of ``schedule``.

    The generators are whatever ``schedule`` carries; call
    :meth:`GateSchedule.as_modified` first for the noisy model.  ``noise``
    defaults to the rates stored in ``schedule.params``.  ``references``
    optionally supplies one pure state per segment; the overlap fidelity with
    it is recorded in that segment's snapshot.
    """
    opts = opts or IntegratorOptions()
    layout = schedule.layout
    params = schedule.params
    noise = NoiseModel.from_params(params) if noise is None else noise
    noise.check_layout(layout)
    d = layout.total_dim
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (d, d):
        raise ValueError(f"initial state shape {rho.shape} does not match layout dim {d}")
    if abs(np.trace(rho) - 1) > 1e-8:
        raise ValueError(f"initial state has trace {np.trace(rho).real:.12g}")
    if references is not None and len(references) != len(schedule.segments):
        raise ValueError("need one reference entry per segment")

    start = time.perf_counter()
    result = IntegrationResult(rho)
    full_diss = None
    if opts.method != "split":
        full_diss = _StructuredDissipator(layout, noise, layout.subsystems, layout.subsystems)
    t0 = 0.0
    for i, seg in enumerate(schedule.segments):
        if seg.duration > 0:
            if opts.method == "split":
                rho, n = _evolve_split(rho, seg, t0, noise, params, layout, opts)
            elif opts.method == "rk4":
                rho, n = _evolve_rk4(rho, seg, t0, noise, params, layout, opts, full_diss)
            else:
                rho, n = _evolve_adaptive(rho, seg, t0, noise, params, layout, opts, full_diss)
            result.steps += n
        t0 += seg.duration
        tr = np.trace(rho).real
        if not np.all(np.isfinite(rho)) or abs(tr - 1) > opts.trace_tol:
            raise IntegrationError(f"trace drifted to {tr:.12g} after segment {i} ({seg.label})")
        fid = float("nan")
        if references is not None and references[i] is not None:
            ref = np.asarray(references[i], dtype=complex)
            fid = float(np.sqrt(max(np.real(ref.conj() @ rho @ ref), 0.0)))
        purity = float(np.real(np.vdot(rho, rho)))
        result.snapshots.append(SegmentSnapshot(i, seg.label, t0, float(tr), purity, fid))

    rho = 0.5 * (rho + rho.conj().T)
    result.rho = rho
    if opts.check_positivity:
        lam = float(np.linalg.eigvalsh(rho)[0])
        result.min_eigenvalue = lam
        if lam < -opts.positivity_tol:
            raise IntegrationError(f"final state has negative eigenvalue {lam:.3e}")
    result.wall_time = time.perf_counter() - start
    if snapshot_csv is not None:
        write_snapshots_csv(result.snapshots, snapshot_csv)
    return result
