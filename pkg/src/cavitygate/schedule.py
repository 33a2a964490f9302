"""Compile the controlled-phase protocol into timed segment lists.

A :class:`GateSchedule` is an ordered tuple of :class:`ScheduleSegment` values.
Interaction segments belong to a numbered protocol operation (``U1 ... U2n+2``,
or ``Step1 ... Step8`` for the three-qubit listing); ``Adjust`` windows of length
``tau_adjust`` sit between them wherever qutrit level spacings must be retuned,
and ``Transport`` windows of length ``tau_move`` play the same role when atoms are
moved in and out of a single cavity.

Window placement for the multi-cavity protocol (``6n - 5`` windows):

* the first tune-in of qutrit 1 and the ancilla overlaps the opening pulse and
  gets no window of its own;
* going forward, each two-qutrit/cavity block on cavity ``l >= 2`` is preceded
  by one window for bringing the ancilla to cavity ``l`` and one for tuning in
  qutrit ``l``, and followed by one for tuning qutrit ``l`` out;
* the ancilla stays on cavity ``n`` across the turnaround, so the two
  ancilla-only stretches there are contiguous, and qutrit ``n`` is tuned back in
  before the return block;
* each return visit to cavity ``m < n`` needs the previous qutrit out, the
  ancilla moved, then qutrit ``m`` in;
* the return to cavity 1 moves the ancilla and tunes qutrit 1 in together, and
  both are tuned out together before the closing pulse.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace

import numpy as np

from .hamiltonian import HamiltonianKind, HamiltonianSpec, PhysicalParams
from .hilbert import SystemLayout

SQRT2 = np.sqrt(2.0)


class SegmentClass(str, enum.Enum):
    PULSE = "Pulse"
    TWO_QUTRIT_RESONANT = "TwoQutritResonant"
    ANCILLA_ONLY_RESONANT = "AncillaOnlyResonant"
    ADJUST = "Adjust"
    TRANSPORT = "Transport"

    @property
    def is_interaction(self) -> bool:
        return self in (
            SegmentClass.PULSE,
            SegmentClass.TWO_QUTRIT_RESONANT,
            SegmentClass.ANCILLA_ONLY_RESONANT,
        )


_CLASS_KINDS = {
    SegmentClass.PULSE: {HamiltonianKind.PULSE_IDEAL, HamiltonianKind.PULSE_MODIFIED},
    SegmentClass.TWO_QUTRIT_RESONANT: {
        HamiltonianKind.TWO_QUTRIT_CAVITY_IDEAL,
        HamiltonianKind.TWO_QUTRIT_CAVITY_MODIFIED,
    },
    SegmentClass.ANCILLA_ONLY_RESONANT: {
        HamiltonianKind.QUTRIT_CAVITY_IDEAL,
        HamiltonianKind.QUTRIT_CAVITY_MODIFIED,
    },
    SegmentClass.ADJUST: {HamiltonianKind.ZERO, HamiltonianKind.CROSSTALK_ONLY},
    SegmentClass.TRANSPORT: {HamiltonianKind.ZERO, HamiltonianKind.CROSSTALK_ONLY},
}


@dataclass(frozen=True)
class ScheduleSegment:
    """One constant-generator stretch of the protocol.

    ``operation`` names the protocol operation the segment belongs to
    (``None`` for Adjust/Transport windows).  ``pulses`` lists
    ``(qutrit, rabi, phase)`` triples and ``resonant`` lists
    ``(subsystem, cavity)`` pairs switched into resonance.
    """

    label: str
    duration: float
    hamiltonian: HamiltonianSpec
    segment_class: SegmentClass
    operation: str | None = None
    pulses: tuple[tuple[int, float, float], ...] = ()
    resonant: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segment_class", SegmentClass(self.segment_class))
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "pulses", tuple((int(q), float(o), float(p)) for q, o, p in self.pulses))
        object.__setattr__(self, "resonant", tuple((str(s), int(c)) for s, c in self.resonant))
        if not np.isfinite(self.duration):
            raise ValueError(f"{self.label}: duration must be finite")
        if self.segment_class.is_interaction:
            if self.duration <= 0:
                raise ValueError(f"{self.label}: interaction segment needs a positive duration, got {self.duration}")
            if self.operation is None:
                raise ValueError(f"{self.label}: interaction segment must belong to an operation")
        elif self.duration < 0:
            raise ValueError(f"{self.label}: negative duration {self.duration}")
        if self.hamiltonian.kind not in _CLASS_KINDS[self.segment_class]:
            raise ValueError(
                f"{self.label}: {self.segment_class.value} segment cannot use {self.hamiltonian.kind.value}"
            )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "duration": self.duration,
            "hamiltonian": self.hamiltonian.to_dict(),
            "segment_class": self.segment_class.value,
            "operation": self.operation,
            "pulses": [list(p) for p in self.pulses],
            "resonant": [list(r) for r in self.resonant],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScheduleSegment":
        return cls(
            label=data["label"],
            duration=data["duration"],
            hamiltonian=HamiltonianSpec.from_dict(data["hamiltonian"]),
            segment_class=SegmentClass(data["segment_class"]),
            operation=data.get("operation"),
            pulses=tuple(tuple(p) for p in data.get("pulses", ())),
            resonant=tuple(tuple(r) for r in data.get("resonant", ())),
        )


@dataclass(frozen=True)
class GateSchedule:
    layout: SystemLayout
    segments: tuple[ScheduleSegment, ...]
    params: PhysicalParams
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def operations(self) -> tuple[str, ...]:
        """Distinct protocol operations in order of first appearance."""
        seen: dict[str, None] = {}
        for s in self.segments:
            if s.operation is not None:
                seen.setdefault(s.operation, None)
        return tuple(seen)

    @property
    def operation_count(self) -> int:
        return len(self.operations)

    def count(self, segment_class: SegmentClass | str) -> int:
        sc = SegmentClass(segment_class)
        return sum(1 for s in self.segments if s.segment_class is sc)

    @property
    def interaction_segments(self) -> tuple[ScheduleSegment, ...]:
        return tuple(s for s in self.segments if s.segment_class.is_interaction)

    def boundaries(self) -> np.ndarray:
        """Start times of every segment followed by the end time."""
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    def as_modified(self) -> "GateSchedule":
        """Swap every generator for its noise-modified counterpart."""
        segs = tuple(replace(s, hamiltonian=s.hamiltonian.modified()) for s in self.segments)
        return replace(self, segments=segs)

    def as_ideal(self) -> "GateSchedule":
        segs = tuple(replace(s, hamiltonian=s.hamiltonian.ideal()) for s in self.segments)
        return replace(self, segments=segs)

    def with_params(self, params: PhysicalParams) -> "GateSchedule":
        return replace(self, params=params)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "layout": self.layout.to_dict(),
            "params": self.params.to_dict(),
            "segments": [s.to_dict() for s in self.segments],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "GateSchedule":
        return cls(
            layout=SystemLayout(**data["layout"]),
            segments=tuple(ScheduleSegment.from_dict(s) for s in data["segments"]),
            params=PhysicalParams.from_dict(data["params"]),
            name=data.get("name", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "GateSchedule":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# builders


class _Builder:
    def __init__(self, params: PhysicalParams, layout: SystemLayout, window: SegmentClass):
        self.params = params
        self.layout = layout
        self.window_class = window
        self.segments: list[ScheduleSegment] = []
        self.op_index = 0
        self.op_prefix = "U"

    @property
    def window_time(self) -> float:
        p = self.params
        return p.tau_adjust if self.window_class is SegmentClass.ADJUST else p.tau_move

    def next_op(self) -> str:
        self.op_index += 1
        return f"{self.op_prefix}{self.op_index}"

    def window(self, what: str) -> None:
        self.segments.append(
            ScheduleSegment(
                label=f"{self.window_class.value}/{what}",
                duration=self.window_time,
                hamiltonian=HamiltonianSpec(HamiltonianKind.ZERO),
                segment_class=self.window_class,
            )
        )

    def pulse(self, op: str, phase: float) -> None:
        p = self.params
        qutrits = tuple(range(2, self.layout.work_qutrit_count + 1))
        rabi = {p.omega[q - 1] for q in qutrits}
        if len(rabi) != 1:
            raise ValueError("simultaneous pulses require equal Rabi frequencies on qutrits 2..n")
        (om,) = rabi
        if om <= 0:
            raise ValueError("Rabi frequency must be positive")
        self.segments.append(
            ScheduleSegment(
                label=f"{op}/pulse",
                duration=np.pi / (2 * om),
                hamiltonian=HamiltonianSpec(HamiltonianKind.PULSE_IDEAL, qutrits=qutrits, phase=phase),
                segment_class=SegmentClass.PULSE,
                operation=op,
                pulses=tuple((q, om, phase) for q in qutrits),
            )
        )

    def _g(self, cavity: int) -> float:
        g = self.params.g[cavity - 1]
        if g <= 0:
            raise ValueError(f"coupling g_{cavity} must be positive")
        return g

    def tc(self, op: str, qutrit: int, cavity: int, part: str) -> None:
        g = self._g(cavity)
        self.segments.append(
            ScheduleSegment(
                label=f"{op}/{part}",
                duration=np.pi / (SQRT2 * g),
                hamiltonian=HamiltonianSpec(
                    HamiltonianKind.TWO_QUTRIT_CAVITY_IDEAL, qutrits=(qutrit,), cavity=cavity
                ),
                segment_class=SegmentClass.TWO_QUTRIT_RESONANT,
                operation=op,
                resonant=((f"q{qutrit}", cavity), ("a", cavity)),
            )
        )

    def jc(self, op: str, cavity: int, total: float, part: str) -> None:
        """Ancilla-only stretch topping the cavity exposure up to ``total * pi / g``."""
        g = self._g(cavity)
        self.segments.append(
            ScheduleSegment(
                label=f"{op}/{part}",
                duration=total * np.pi / g - np.pi / (SQRT2 * g),
                hamiltonian=HamiltonianSpec(HamiltonianKind.QUTRIT_CAVITY_IDEAL, cavity=cavity),
                segment_class=SegmentClass.ANCILLA_ONLY_RESONANT,
                operation=op,
                resonant=(("a", cavity),),
            )
        )


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")


def _params_for(n: int, params: PhysicalParams, cavity_count: int) -> None:
    if params.n_qutrits != n or params.n_cavities != cavity_count:
        raise ValueError(
            f"params describe {params.n_qutrits} qutrits and {params.n_cavities} cavities; "
            f"expected {n} and {cavity_count}"
        )


def _emit_protocol(b: _Builder, n: int, single_cavity: bool) -> None:
    """Shared operation sequence; window placement depends on ``single_cavity``."""
    cav = (lambda l: 1) if single_cavity else (lambda l: l)
    atoms = single_cavity

    b.pulse(b.next_op(), -np.pi / 2)

    op = b.next_op()
    if atoms:
        b.window("q1 in, a in")
    b.tc(op, 1, cav(1), "tc")

    for l in range(2, n + 1):
        op = b.next_op()
        if atoms:
            b.window(f"q{l - 1} out, q{l} in" if l == 2 else f"q{l} in")
        else:
            b.window(f"q{l - 1} off, a to c{l}" if l == 2 else f"a to c{l}")
            b.window(f"q{l} on")
        b.tc(op, l, cav(l), "tc")
        b.window(f"q{l} {'out' if atoms else 'off'}")
        b.jc(op, cav(l), 1.0 if l == n else 2.0, "jc")

    # return sweep: cavities n, n-1, ..., 2
    for m in range(n, 1, -1):
        op = b.next_op()
        if m < n:
            if atoms:
                b.window(f"q{m + 1} out")
            else:
                b.window(f"q{m + 1} off")
                b.window(f"a to c{m}")
        b.jc(op, cav(m), 2.0, "jc")
        b.window(f"q{m} {'in' if atoms else 'on'}")
        b.tc(op, m, cav(m), "tc")

    op = b.next_op()
    if atoms:
        b.window("q2 out, q1 in")
    else:
        b.window("q2 off")
        b.window("a to c1, q1 on")
    b.tc(op, 1, cav(1), "tc")

    b.window("q1 out, a out" if atoms else "q1 off, a off")
    b.pulse(b.next_op(), np.pi / 2)


def compile_nqubit(n: int, params: PhysicalParams, photon_cutoff: int = 1) -> GateSchedule:
    """Multi-cavity ``n``-qubit controlled-phase gate in ``2n + 2`` operations."""
    _check_n(n)
    _params_for(n, params, n)
    layout = SystemLayout(n, n, photon_cutoff)
    b = _Builder(params, layout, SegmentClass.ADJUST)
    _emit_protocol(b, n, single_cavity=False)
    return GateSchedule(layout, tuple(b.segments), params, name=f"cphase-{n}")


def compile_3qubit(params: PhysicalParams, photon_cutoff: int = 1) -> GateSchedule:
    """Three-qubit listing; identical to ``compile_nqubit(3)`` with ``Step`` labels."""
    sched = compile_nqubit(3, params, photon_cutoff)
    segs = []
    for s in sched.segments:
        if s.operation is None:
            segs.append(s)
            continue
        step = "Step" + s.operation[1:]
        segs.append(replace(s, operation=step, label=step + s.label[len(s.operation):]))
    return replace(sched, segments=tuple(segs), name="cphase-3-steps")


def _hadamard_segment(op: str, n: int, params: PhysicalParams, phase: float) -> ScheduleSegment:
    om = params.omega[n - 1]
    if om <= 0:
        raise ValueError("Rabi frequency must be positive")
    return ScheduleSegment(
        label=f"{op}/hadamard",
        duration=np.pi / (4 * om),
        hamiltonian=HamiltonianSpec(
            HamiltonianKind.PULSE_IDEAL, qutrits=(n,), phase=phase, transition=(0, 1)
        ),
        segment_class=SegmentClass.PULSE,
        operation=op,
        pulses=((n, om, phase),),
    )


def compile_toffoli(n: int, params: PhysicalParams, photon_cutoff: int = 1) -> GateSchedule:
    """Toffoli gate: the controlled-phase gate between two basis-change pulses on the target.

    The target's |0> <-> |1> transition is driven for ``Omega t = pi / 4``.  The
    closing pulse (phase ``-pi/2``) sends ``|0> -> (|0> + |1>)/sqrt 2`` and the
    opening one (phase ``+pi/2``) is its inverse, so the sandwich turns the
    ``-1`` phase on ``|1...1>`` into an exact NOT on the target.
    """
    core = compile_nqubit(n, params, photon_cutoff)
    pre = _hadamard_segment("H_in", n, params, np.pi / 2)
    post = _hadamard_segment("H_out", n, params, -np.pi / 2)
    return replace(core, segments=(pre,) + core.segments + (post,), name=f"toffoli-{n}")


def compile_atom_single_cavity(
    params: PhysicalParams, n: int = 3, photon_cutoff: int = 1
) -> GateSchedule:
    """Single-cavity variant: atoms are moved in and out instead of retuned.

    Uses ``4n - 2`` Transport windows of length ``tau_move`` (10 for three qubits).
    """
    _check_n(n)
    _params_for(n, params, 1)
    layout = SystemLayout(n, 1, photon_cutoff)
    b = _Builder(params, layout, SegmentClass.TRANSPORT)
    b.op_prefix = "Step" if n == 3 else "U"
    _emit_protocol(b, n, single_cavity=True)
    return GateSchedule(layout, tuple(b.segments), params, name=f"atom-cphase-{n}")


def timing_budget(n: int, params: PhysicalParams) -> float:
    """Closed-form total time of the multi-cavity gate in seconds."""
    _check_n(n)
    _params_for(n, params, n)
    om = params.omega[1]
    g = params.g
    tau = np.pi / om + SQRT2 * np.pi / g[0]
    tau += sum(4 * np.pi / g[j - 2] for j in range(3, n + 1))
    tau += 3 * np.pi / g[n - 1] + (6 * n - 5) * params.tau_adjust
    return float(tau)


def atom_timing_budget(params: PhysicalParams, n: int = 3) -> float:
    """Closed-form total time of the single-cavity variant in seconds.

    For three qubits this is ``pi/Omega + (sqrt 2 + 7) pi / g + 10 tau_m``.
    """
    _check_n(n)
    om, g = params.omega[1], params.g[0]
    tc_total = 2 * np.pi / (SQRT2 * g)
    middle = (4 * (n - 2) + 3) * np.pi / g
    return float(np.pi / om + tc_total + middle + (4 * n - 2) * params.tau_move)


def apply_time_error(schedule: GateSchedule, dt: float) -> GateSchedule:
    """Add ``dt`` seconds to every interaction segment; windows keep their length."""
    if dt == 0:
        return schedule
    segs = []
    for s in schedule.segments:
        if s.segment_class.is_interaction:
            new = s.duration + dt
            if new <= 0:
                raise ValueError(
                    f"time error {dt:.3e} s makes segment {s.label} non-positive ({new:.3e} s)"
                )
            s = replace(s, duration=new)
        segs.append(s)
    return replace(schedule, segments=tuple(segs))


def min_interaction_duration(schedule: GateSchedule) -> float:
    return min(s.duration for s in schedule.interaction_segments)


def palindrome_cavities(schedule: GateSchedule) -> tuple[list[int], list[int]]:
    """Cavities visited by two-qutrit blocks on the forward and return sweeps."""
    visits = [s.hamiltonian.cavity for s in schedule.segments if s.segment_class is SegmentClass.TWO_QUTRIT_RESONANT]
    half = len(visits) // 2
    return visits[:half], visits[half:]
