"""Interaction-picture Hamiltonians for the qutrit / cavity network.

All quantities use hbar = 1: couplings, Rabi frequencies and detunings are
angular frequencies in rad/s and times are in seconds.

The gate is built from resonant blocks.  Work qutrits 2..n are driven on
|1> <-> |2> by a classical pulse.  The ancilla exchanges a photon with one
cavity on its |0> <-> |1> transition, either alone or together with the work
qutrit that lives in that cavity.

The ``*_modified`` factories add the off-resonant couplings to the neighbouring
transition of each qutrit (rotating at the qutrit anharmonicity) and the
inter-cavity photon hopping ``eps(t)``.  In the two-qutrit block the unwanted
couplings act on |1> <-> |2>: ``mu_tilde * exp(i delta_l t) a^+ |1><2|_l`` and
``g_tilde * exp(i delta_a t) a^+ |1><2|_a``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .hilbert import ANCILLA, SystemLayout, annihilation_op, embed, transition_op

TWO_PI = 2.0 * np.pi
MHZ = 1e6
GHZ = 1e9
KHZ = 1e3
NS = 1e-9
US = 1e-6

# per-qutrit decoherence rate fields; tuples of length n + 1 (work qutrits, then ancilla)
RATE_FIELDS = ("gamma01", "gamma12", "gamma02", "gamma1phi", "gamma2phi")


def _tuple(values, length: int | None = None, name: str = "") -> tuple[float, ...]:
    if np.isscalar(values):
        if length is None:
            raise ValueError(f"{name}: scalar given where a sequence is required")
        return (float(values),) * length
    out = tuple(float(v) for v in values)
    if length is not None and len(out) != length:
        raise ValueError(f"{name}: expected {length} values, got {len(out)}")
    return out


@dataclass(frozen=True)
class PhysicalParams:
    """Couplings, detunings and decoherence rates of the device.

    Per-work-qutrit sequences are indexed by qutrit ``l - 1``; per-cavity
    sequences by cavity ``l - 1``; decoherence-rate sequences have one entry per
    work qutrit followed by one for the ancilla.  ``crosstalk`` maps a cavity
    pair ``(l, k)`` with ``l < k`` to its hopping strength; the corresponding
    detuning is ``cavity_freqs[k-1] - cavity_freqs[l-1]``.
    """

    omega: tuple[float, ...]
    g: tuple[float, ...]
    mu: tuple[float, ...]
    omega_tilde: tuple[float, ...]
    g_tilde: tuple[float, ...]
    mu_tilde: tuple[float, ...]
    anharm_pulse: tuple[float, ...]
    anharm_qutrit: tuple[float, ...]
    anharm_ancilla: tuple[float, ...]
    cavity_freqs: tuple[float, ...]
    crosstalk: Mapping[tuple[int, int], float] = field(default_factory=dict)
    gamma01: tuple[float, ...] = ()
    gamma12: tuple[float, ...] = ()
    gamma02: tuple[float, ...] = ()
    gamma1phi: tuple[float, ...] = ()
    gamma2phi: tuple[float, ...] = ()
    kappa: tuple[float, ...] = ()
    tau_adjust: float = 0.0
    tau_move: float = 0.0

    def __post_init__(self):
        n = len(self.omega)
        k = len(self.g)
        if n < 2:
            raise ValueError("need at least two work qutrits")
        if k not in (1, n):
            raise ValueError(f"number of cavities must be 1 or {n}, got {k}")
        per_q = ("omega", "mu", "omega_tilde", "mu_tilde", "anharm_pulse", "anharm_qutrit")
        per_c = ("g", "g_tilde", "anharm_ancilla", "cavity_freqs", "kappa")
        for name in per_q:
            object.__setattr__(self, name, _tuple(getattr(self, name), n, name))
        for name in per_c:
            vals = getattr(self, name)
            if name == "kappa" and len(vals) == 0:
                vals = 0.0
            object.__setattr__(self, name, _tuple(vals, k, name))
        for name in RATE_FIELDS:
            vals = getattr(self, name)
            if not np.isscalar(vals) and len(vals) == 0:
                vals = 0.0
            object.__setattr__(self, name, _tuple(vals, n + 1, name))
        xt = {}
        for key, val in dict(self.crosstalk).items():
            l, m = sorted(int(x) for x in key)
            if l == m or not (1 <= l <= k and 1 <= m <= k):
                raise ValueError(f"invalid crosstalk pair {key!r} for {k} cavities")
            xt[(l, m)] = float(val)
        object.__setattr__(self, "crosstalk", xt)
        for f in fields(self):
            val = getattr(self, f.name)
            vals = val.values() if isinstance(val, dict) else (val if isinstance(val, tuple) else (val,))
            for v in vals:
                if not np.isfinite(v) or v < 0:
                    raise ValueError(f"{f.name} must be finite and >= 0, got {v}")

    @property
    def n_qutrits(self) -> int:
        return len(self.omega)

    @property
    def n_cavities(self) -> int:
        return len(self.g)

    def home_cavity(self, qutrit: int) -> int:
        return qutrit if self.n_cavities == self.n_qutrits else 1

    def detuning(self, l: int, k: int) -> float:
        """Cavity-frequency difference ``omega_ck - omega_cl``."""
        return self.cavity_freqs[k - 1] - self.cavity_freqs[l - 1]

    def coupling_ratio(self, qutrit: int) -> float:
        """``mu_l / g_l`` for a work qutrit and its home cavity."""
        return self.mu[qutrit - 1] / self.g[self.home_cavity(qutrit) - 1]

    def with_coupling_ratio(self, c: float) -> "PhysicalParams":
        """Set ``mu_l = c * g_l`` for every work qutrit, keeping ``mu_tilde / mu`` fixed."""
        if not c > 0:
            raise ValueError(f"coupling ratio c must be > 0, got {c}")
        mu = tuple(c * self.g[self.home_cavity(l) - 1] for l in range(1, self.n_qutrits + 1))
        mu_tilde = tuple(
            (mt / m) * mnew if m > 0 else mt for mt, m, mnew in zip(self.mu_tilde, self.mu, mu)
        )
        return replace(self, mu=mu, mu_tilde=mu_tilde)

    def without_noise_terms(self) -> "PhysicalParams":
        """Zero the off-resonant couplings and the inter-cavity crosstalk."""
        n, k = self.n_qutrits, self.n_cavities
        return replace(
            self,
            omega_tilde=(0.0,) * n,
            mu_tilde=(0.0,) * n,
            g_tilde=(0.0,) * k,
            crosstalk={},
        )

    def without_decoherence(self) -> "PhysicalParams":
        n, k = self.n_qutrits, self.n_cavities
        zeros = {name: (0.0,) * (n + 1) for name in RATE_FIELDS}
        return replace(self, kappa=(0.0,) * k, **zeros)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "crosstalk":
                out[f.name] = [[l, m, v] for (l, m), v in sorted(val.items())]
            else:
                out[f.name] = list(val) if isinstance(val, tuple) else val
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "PhysicalParams":
        data = dict(data)
        xt = data.pop("crosstalk", [])
        if isinstance(xt, Mapping):
            xt = {tuple(int(x) for x in str(key).split(",")) if isinstance(key, str) else key: v for key, v in xt.items()}
        else:
            xt = {(int(l), int(m)): float(v) for l, m, v in xt}
        return cls(crosstalk=xt, **{key: (tuple(v) if isinstance(v, list) else v) for key, v in data.items()})


def default_params(n: int = 3, cavity_count: int | None = None) -> PhysicalParams:
    """Circuit-QED parameter bundle used for the three-qubit simulations.

    Cavities sit at 5, 6, 7, ... GHz, ``g = mu = 2 pi x 10 MHz``,
    ``Omega = 2 pi x 15 MHz`` and every anharmonicity is ``2 pi x 600 MHz``.
    Transmon matrix elements give ``mu_tilde = sqrt(2) mu``, ``g_tilde = sqrt(2) g``
    and ``Omega_tilde = Omega / sqrt(2)``; every cavity pair hops with ``0.1 g``.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    k = n if cavity_count is None else cavity_count
    g = TWO_PI * 10 * MHZ
    om = TWO_PI * 15 * MHZ
    anh = TWO_PI * 600 * MHZ
    freqs = tuple(TWO_PI * (5.0 + i) * GHZ for i in range(k))
    xt = {(l, m): 0.1 * g for l, m in itertools.combinations(range(1, k + 1), 2)}
    return PhysicalParams(
        omega=(om,) * n,
        g=(g,) * k,
        mu=(g,) * n,
        omega_tilde=(om / np.sqrt(2),) * n,
        g_tilde=(np.sqrt(2) * g,) * k,
        mu_tilde=(np.sqrt(2) * g,) * n,
        anharm_pulse=(anh,) * n,
        anharm_qutrit=(anh,) * n,
        anharm_ancilla=(anh,) * k,
        cavity_freqs=freqs,
        crosstalk=xt,
        gamma01=(1 / (20 * US),) * (n + 1),
        gamma12=(1 / (10 * US),) * (n + 1),
        gamma02=(1 / (25 * US),) * (n + 1),
        gamma1phi=(1 / (15 * US),) * (n + 1),
        gamma2phi=(1 / (15 * US),) * (n + 1),
        kappa=(1 / (10 * US),) * k,
        tau_adjust=1 * NS,
        tau_move=1 * US,
    )


def atom_defaults(n: int = 3) -> PhysicalParams:
    """Rydberg-atom single-cavity numbers: ``g = Omega = 2 pi x 50 kHz``, ``tau_m = 1 us``."""
    g = TWO_PI * 50 * KHZ
    base = default_params(n, cavity_count=1)
    return replace(
        base.without_noise_terms(),
        omega=(g,) * n,
        g=(g,),
        mu=(g,) * n,
        cavity_freqs=(TWO_PI * 51.1 * GHZ,),
        tau_move=1 * US,
    )


def estimate_crosstalk(
    capacitances: Sequence[float], ancilla_capacitance: float, g: float | Sequence[float]
) -> dict[tuple[int, int], float]:
    """Inter-cavity hopping from the coupling-capacitor network.

    ``g_lk ~ g_l * C_l / C_sum`` with ``C_sum`` the sum of the coupling
    capacitances and the ancilla's own capacitance.  Returns one value per
    cavity pair ``(l, k)``, ``l < k``, using the first cavity's ``g_l, C_l``.
    """
    caps = [float(c) for c in capacitances]
    if any(c <= 0 for c in caps) or ancilla_capacitance <= 0:
        raise ValueError("capacitances must be positive")
    gs = _tuple(g, len(caps), "g")
    c_sum = sum(caps) + float(ancilla_capacitance)
    return {
        (l, k): gs[l - 1] * caps[l - 1] / c_sum
        for l, k in itertools.combinations(range(1, len(caps) + 1), 2)
    }


def cavity_lifetime(quality_factor: float, cavity_freq: float) -> float:
    """Photon lifetime ``1/kappa = Q / omega_c`` in seconds (``omega_c`` in rad/s)."""
    if quality_factor <= 0 or cavity_freq <= 0:
        raise ValueError("quality factor and cavity frequency must be positive")
    return quality_factor / cavity_freq


# ---------------------------------------------------------------------------
# operator factories


def _check_pulse_qutrit(l: int, layout: SystemLayout) -> None:
    layout.check_qutrit(l)
    if l < 2:
        raise ValueError(f"pulses are only applied to work qutrits 2..n, got {l}")


def _sigma(i: int, j: int, subsystem: str, layout: SystemLayout) -> sp.csr_matrix:
    return embed(transition_op(i, j), subsystem, layout)


def _a(cavity: int, layout: SystemLayout) -> sp.csr_matrix:
    return embed(annihilation_op(layout.photon_cutoff), f"c{cavity}", layout)


def _herm(op: sp.csr_matrix) -> sp.csr_matrix:
    out = (op + op.conj().T).tocsr()
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


def _zero(layout: SystemLayout) -> sp.csr_matrix:
    d = layout.total_dim
    return sp.csr_matrix((d, d), dtype=complex)


def _check_layout(params: PhysicalParams, layout: SystemLayout) -> None:
    if params.n_qutrits != layout.work_qutrit_count or params.n_cavities != layout.cavity_count:
        raise ValueError(
            f"params describe {params.n_qutrits} qutrits / {params.n_cavities} cavities, "
            f"layout has {layout.work_qutrit_count} / {layout.cavity_count}"
        )


def _resolve_cavity(l: int, cavity: int | None, layout: SystemLayout) -> int:
    layout.check_qutrit(l)
    c = layout.home_cavity(l) if cavity is None else cavity
    layout.check_cavity(c)
    return c


def h_pulse_ideal(
    l: int,
    params: PhysicalParams,
    layout: SystemLayout,
    phi: float = -np.pi / 2,
    transition: tuple[int, int] = (1, 2),
) -> sp.csr_matrix:
    """``Omega_l (e^{i phi} |1><2|_l + h.c.)``; ``transition`` selects another level pair."""
    _check_layout(params, layout)
    _check_pulse_qutrit(l, layout)
    i, j = transition
    term = params.omega[l - 1] * np.exp(1j * phi) * _sigma(i, j, f"q{l}", layout)
    return _herm(term)


def h_qutrit_cavity_ideal(l: int, params: PhysicalParams, layout: SystemLayout) -> sp.csr_matrix:
    """Ancilla |0><->|1> resonant with cavity ``l``: ``g_l a_l^+ |0><1|_a + h.c.``."""
    _check_layout(params, layout)
    layout.check_cavity(l)
    term = params.g[l - 1] * (_a(l, layout).conj().T @ _sigma(0, 1, ANCILLA, layout))
    return _herm(term)


def h_two_qutrit_cavity_ideal(
    l: int, params: PhysicalParams, layout: SystemLayout, cavity: int | None = None
) -> sp.csr_matrix:
    """Work qutrit ``l`` and the ancilla both resonant with ``cavity`` (its home cavity by default)."""
    _check_layout(params, layout)
    c = _resolve_cavity(l, cavity, layout)
    ad = _a(c, layout).conj().T
    term = params.mu[l - 1] * (ad @ _sigma(0, 1, f"q{l}", layout))
    term = term + params.g[c - 1] * (ad @ _sigma(0, 1, ANCILLA, layout))
    return _herm(term)


def h_crosstalk(t: float, params: PhysicalParams, layout: SystemLayout) -> sp.csr_matrix:
    """Photon hopping ``sum g_lk (e^{i Delta_lk t} a_l a_k^+ + h.c.)`` between cavity pairs."""
    _check_layout(params, layout)
    out = _zero(layout)
    for (l, k), glk in sorted(params.crosstalk.items()):
        if glk == 0.0:
            continue
        phase = np.exp(1j * params.detuning(l, k) * t)
        out = out + glk * phase * (_a(l, layout) @ _a(k, layout).conj().T)
    return _herm(out) if out.nnz else out


def h_pulse_modified(
    l: int | Sequence[int],
    t: float,
    params: PhysicalParams,
    layout: SystemLayout,
    phi: float = -np.pi / 2,
    transition: tuple[int, int] = (1, 2),
) -> sp.csr_matrix:
    """Pulse Hamiltonian with the off-resonant |0><->|1> drive and crosstalk.

    Several qutrits may be listed; their pulses run simultaneously.  A pulse
    on the |0><->|1> transition (used for the Toffoli basis change) carries no
    extra off-resonant term.
    """
    _check_layout(params, layout)
    qutrits = (l,) if np.isscalar(l) else tuple(l)
    out = _zero(layout)
    for q in qutrits:
        out = out + h_pulse_ideal(q, params, layout, phi, transition)
        if tuple(transition) == (1, 2) and params.omega_tilde[q - 1] != 0.0:
            rot = np.exp(1j * phi) * np.exp(-1j * params.anharm_pulse[q - 1] * t)
            out = out + _herm(params.omega_tilde[q - 1] * rot * _sigma(0, 1, f"q{q}", layout))
    return (out + h_crosstalk(t, params, layout)).tocsr()


def h_qutrit_cavity_modified(
    l: int, t: float, params: PhysicalParams, layout: SystemLayout
) -> sp.csr_matrix:
    """Ancilla/cavity exchange plus the ancilla |1><->|2> leak and crosstalk."""
    out = h_qutrit_cavity_ideal(l, params, layout)
    if params.g_tilde[l - 1] != 0.0:
        rot = np.exp(1j * params.anharm_ancilla[l - 1] * t)
        leak = params.g_tilde[l - 1] * rot * (_a(l, layout).conj().T @ _sigma(1, 2, ANCILLA, layout))
        out = out + _herm(leak)
    return (out + h_crosstalk(t, params, layout)).tocsr()


def h_two_qutrit_cavity_modified(
    l: int, t: float, params: PhysicalParams, layout: SystemLayout, cavity: int | None = None
) -> sp.csr_matrix:
    """Two-qutrit/cavity exchange plus both |1><->|2> leaks and crosstalk."""
    c = _resolve_cavity(l, cavity, layout)
    out = h_two_qutrit_cavity_ideal(l, params, layout, cavity=c)
    ad = _a(c, layout).conj().T
    if params.mu_tilde[l - 1] != 0.0:
        rot = np.exp(1j * params.anharm_qutrit[l - 1] * t)
        out = out + _herm(params.mu_tilde[l - 1] * rot * (ad @ _sigma(1, 2, f"q{l}", layout)))
    if params.g_tilde[c - 1] != 0.0:
        rot = np.exp(1j * params.anharm_ancilla[c - 1] * t)
        out = out + _herm(params.g_tilde[c - 1] * rot * (ad @ _sigma(1, 2, ANCILLA, layout)))
    return (out + h_crosstalk(t, params, layout)).tocsr()


# ---------------------------------------------------------------------------
# segment-level description


class HamiltonianKind(str, enum.Enum):
    PULSE_IDEAL = "PulseIdeal"
    QUTRIT_CAVITY_IDEAL = "QutritCavityIdeal"
    TWO_QUTRIT_CAVITY_IDEAL = "TwoQutritCavityIdeal"
    PULSE_MODIFIED = "PulseModified"
    QUTRIT_CAVITY_MODIFIED = "QutritCavityModified"
    TWO_QUTRIT_CAVITY_MODIFIED = "TwoQutritCavityModified"
    CROSSTALK_ONLY = "CrosstalkOnly"
    ZERO = "Zero"

    @property
    def is_modified(self) -> bool:
        return self in _TO_IDEAL


_TO_MODIFIED = {
    HamiltonianKind.PULSE_IDEAL: HamiltonianKind.PULSE_MODIFIED,
    HamiltonianKind.QUTRIT_CAVITY_IDEAL: HamiltonianKind.QUTRIT_CAVITY_MODIFIED,
    HamiltonianKind.TWO_QUTRIT_CAVITY_IDEAL: HamiltonianKind.TWO_QUTRIT_CAVITY_MODIFIED,
    HamiltonianKind.ZERO: HamiltonianKind.CROSSTALK_ONLY,
}
_TO_IDEAL = {v: k for k, v in _TO_MODIFIED.items()}

_PULSE_KINDS = {HamiltonianKind.PULSE_IDEAL, HamiltonianKind.PULSE_MODIFIED}
_QC_KINDS = {HamiltonianKind.QUTRIT_CAVITY_IDEAL, HamiltonianKind.QUTRIT_CAVITY_MODIFIED}
_TQC_KINDS = {HamiltonianKind.TWO_QUTRIT_CAVITY_IDEAL, HamiltonianKind.TWO_QUTRIT_CAVITY_MODIFIED}


@dataclass(frozen=True)
class HamiltonianSpec:
    """Which generator governs a schedule segment.

    ``qutrits`` lists pulsed qutrits (pulse kinds) or the single work qutrit of
    a two-qutrit/cavity block; ``cavity`` names the resonant cavity.
    """

    kind: HamiltonianKind
    qutrits: tuple[int, ...] = ()
    cavity: int | None = None
    phase: float = 0.0
    transition: tuple[int, int] = (1, 2)

    def __post_init__(self):
        object.__setattr__(self, "kind", HamiltonianKind(self.kind))
        object.__setattr__(self, "qutrits", tuple(int(q) for q in self.qutrits))
        object.__setattr__(self, "transition", tuple(int(x) for x in self.transition))
        kind = self.kind
        if kind in _PULSE_KINDS:
            if not self.qutrits or self.cavity is not None:
                raise ValueError("pulse Hamiltonians need qutrits and no cavity")
        elif kind in _QC_KINDS:
            if self.qutrits or self.cavity is None:
                raise ValueError("ancilla/cavity Hamiltonians need a cavity and no work qutrit")
        elif kind in _TQC_KINDS:
            if len(self.qutrits) != 1 or self.cavity is None:
                raise ValueError("two-qutrit/cavity Hamiltonians need one work qutrit and one cavity")
        elif self.qutrits or self.cavity is not None:
            raise ValueError(f"{kind.value} takes no qutrit or cavity indices")

    def modified(self) -> "HamiltonianSpec":
        return replace(self, kind=_TO_MODIFIED.get(self.kind, self.kind))

    def ideal(self) -> "HamiltonianSpec":
        return replace(self, kind=_TO_IDEAL.get(self.kind, self.kind))

    def build(self, params: PhysicalParams, layout: SystemLayout, t: float = 0.0) -> sp.csr_matrix:
        k = self.kind
        K = HamiltonianKind
        if k is K.PULSE_IDEAL:
            out = _zero(layout)
            for q in self.qutrits:
                out = out + h_pulse_ideal(q, params, layout, self.phase, self.transition)
            return out.tocsr()
        if k is K.PULSE_MODIFIED:
            return h_pulse_modified(self.qutrits, t, params, layout, self.phase, self.transition)
        if k is K.QUTRIT_CAVITY_IDEAL:
            return h_qutrit_cavity_ideal(self.cavity, params, layout)
        if k is K.QUTRIT_CAVITY_MODIFIED:
            return h_qutrit_cavity_modified(self.cavity, t, params, layout)
        if k is K.TWO_QUTRIT_CAVITY_IDEAL:
            return h_two_qutrit_cavity_ideal(self.qutrits[0], params, layout, self.cavity)
        if k is K.TWO_QUTRIT_CAVITY_MODIFIED:
            return h_two_qutrit_cavity_modified(self.qutrits[0], t, params, layout, self.cavity)
        if k is K.CROSSTALK_ONLY:
            return h_crosstalk(t, params, layout)
        return _zero(layout)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "qutrits": list(self.qutrits),
            "cavity": self.cavity,
            "phase": self.phase,
            "transition": list(self.transition),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "HamiltonianSpec":
        return cls(
            kind=HamiltonianKind(data["kind"]),
            qutrits=tuple(data.get("qutrits", ())),
            cavity=data.get("cavity"),
            phase=float(data.get("phase", 0.0)),
            transition=tuple(data.get("transition", (1, 2))),
        )


def _crosstalk_cavities(params: PhysicalParams) -> set[int]:
    return {c for pair, v in params.crosstalk.items() if v != 0.0 for c in pair}


def frame_energies(
    spec: HamiltonianSpec, params: PhysicalParams, layout: SystemLayout
) -> dict[str, np.ndarray]:
    """Local diagonal energies that absorb every explicit time dependence of ``spec``.

    For the returned ``H0 = sum_s diag(e_s)`` one has, for all ``t``,
    ``H(t) = exp(i H0 t) H(0) exp(-i H0 t)``; the generator ``H0 + H(0)`` of the
    rotated frame is therefore time independent within a segment.  Only the
    subsystems that ``spec`` acts on appear in the result.
    """
    K = HamiltonianKind
    out: dict[str, np.ndarray] = {}
    crosstalk = spec.kind.is_modified and layout.cavity_count > 1 and _crosstalk_cavities(params)
    cav_energy = {}
    if crosstalk:
        for c in range(1, layout.cavity_count + 1):
            cav_energy[c] = params.cavity_freqs[c - 1] - params.cavity_freqs[0]
    nph = np.arange(layout.photon_cutoff + 1, dtype=float)

    def cavity(c: int) -> float:
        e = cav_energy.get(c, 0.0)
        out[f"c{c}"] = e * nph
        return e

    if crosstalk:
        for c in sorted(_crosstalk_cavities(params)):
            cavity(c)

    if spec.kind in _PULSE_KINDS:
        for q in spec.qutrits:
            if spec.kind is K.PULSE_MODIFIED and spec.transition == (1, 2) and params.omega_tilde[q - 1] != 0:
                d = params.anharm_pulse[q - 1]
                out[f"q{q}"] = np.array([0.0, d, d])
            else:
                out[f"q{q}"] = np.zeros(3)
    elif spec.kind in _QC_KINDS or spec.kind in _TQC_KINDS:
        c = spec.cavity
        e = cavity(c)
        out[ANCILLA] = np.array([0.0, e, 2 * e - params.anharm_ancilla[c - 1]])
        if spec.kind in _TQC_KINDS:
            q = spec.qutrits[0]
            out[f"q{q}"] = np.array([0.0, e, 2 * e - params.anharm_qutrit[q - 1]])
    return out


def active_subsystems(
    spec: HamiltonianSpec, params: PhysicalParams, layout: SystemLayout
) -> tuple[str, ...]:
    """Subsystems touched by ``spec``'s generator, in canonical order."""
    names = set(frame_energies(spec, params, layout))
    return tuple(s for s in layout.subsystems if s in names)


def total_excitation_number(layout: SystemLayout) -> sp.csr_matrix:
    """Count of |1> occupations over all qutrits plus photons over all cavities."""
    out = _zero(layout)
    for s in layout.subsystems:
        if s.startswith("c"):
            a = annihilation_op(layout.photon_cutoff)
            out = out + embed(a.conj().T @ a, s, layout)
        else:
            out = out + embed(transition_op(1, 1), s, layout)
    return out.tocsr()


def collect(ops: Iterable[sp.spmatrix]) -> sp.csr_matrix:
    ops = list(ops)
    out = ops[0]
    for op in ops[1:]:
        out = out + op
    return sp.csr_matrix(out)
