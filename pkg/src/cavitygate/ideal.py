"""Closed-form ideal evolutions and a dense propagator oracle.

The closed forms act on state vectors by reshaping them into one tensor axis
per subsystem and rewriting only the few local basis components a resonant
block couples.  Any amplitude sitting in a local configuration the block would
couple but the closed form does not cover (two excitations, for example)
raises :class:`SectorError`; in a correct schedule that never happens.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .hilbert import ANCILLA, SystemLayout, is_hermitian
from .schedule import GateSchedule, SegmentClass

DENSE_DIM_LIMIT = 3000
SECTOR_ATOL = 1e-12

Rules = Mapping[tuple[int, ...], Mapping[tuple[int, ...], complex]]


class SectorError(ValueError):
    """A state component lies outside the sector a closed-form map describes."""


def _apply_rules(
    psi: np.ndarray, layout: SystemLayout, subsystems: tuple[str, ...], rules: Rules,
    passthrough: Callable[[tuple[int, ...]], bool],
) -> np.ndarray:
    """Rewrite local components of ``psi`` on ``subsystems`` using ``rules``.

    ``rules[src][dst]`` is the amplitude sent from local configuration ``src``
    to ``dst``.  Configurations absent from ``rules`` are kept unchanged when
    ``passthrough`` accepts them and must carry no amplitude otherwise.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (layout.total_dim,):
        raise ValueError(f"state has shape {psi.shape}, layout needs ({layout.total_dim},)")
    axes = [layout.axis(s) for s in subsystems]
    t = np.moveaxis(psi.reshape(layout.dims), axes, range(len(axes)))
    local_dims = t.shape[: len(axes)]
    out = np.zeros_like(t)
    for cfg in np.ndindex(*local_dims):
        block = t[cfg]
        if cfg in rules:
            for dst, amp in rules[cfg].items():
                if amp != 0:
                    out[dst] += amp * block
        elif passthrough(cfg):
            out[cfg] += block
        elif np.max(np.abs(block), initial=0.0) > SECTOR_ATOL:
            labels = dict(zip(subsystems, cfg))
            raise SectorError(f"amplitude in unsupported configuration {labels}")
    return np.moveaxis(out, range(len(axes)), axes).reshape(-1)


def _rotation(theta: float, phi: float) -> tuple[complex, complex, complex, complex]:
    c, s = np.cos(theta), np.sin(theta)
    # (lo->lo, lo->hi, hi->lo, hi->hi)
    return c, -1j * np.exp(-1j * phi) * s, -1j * np.exp(1j * phi) * s, c


def pulse_map(
    psi: np.ndarray,
    l: int,
    theta: float,
    phi: float,
    layout: SystemLayout,
    transition: tuple[int, int] = (1, 2),
) -> np.ndarray:
    """Resonant drive of qutrit ``l`` for pulse area ``theta = Omega t``.

    With ``transition = (i, j)``: ``|i> -> cos|i> - i e^{-i phi} sin|j>`` and
    ``|j> -> -i e^{i phi} sin|i> + cos|j>``; the third level is untouched.
    """
    layout.check_qutrit(l)
    if theta < 0:
        raise ValueError(f"pulse area must be >= 0, got {theta}")
    lo, hi = transition
    if lo == hi or {lo, hi} - {0, 1, 2}:
        raise ValueError(f"invalid transition {transition!r}")
    ll, lh, hl, hh = _rotation(theta, phi)
    rules = {(lo,): {(lo,): ll, (hi,): lh}, (hi,): {(lo,): hl, (hi,): hh}}
    return _apply_rules(psi, layout, (f"q{l}",), rules, lambda cfg: True)


def _jc_rules(theta: float) -> dict:
    c, s = np.cos(theta), np.sin(theta)
    return {
        (0, 0): {(0, 0): 1.0},
        (1, 0): {(1, 0): c, (0, 1): -1j * s},
        (0, 1): {(0, 1): c, (1, 0): -1j * s},
    }


def jc_map(psi: np.ndarray, cavity: int, theta: float, layout: SystemLayout) -> np.ndarray:
    """Ancilla/cavity exchange for ``theta = g t``: ``|1,0> -> cos|1,0> - i sin|0,1>``."""
    layout.check_cavity(cavity)
    return _apply_rules(psi, layout, (ANCILLA, f"c{cavity}"), _jc_rules(theta), lambda cfg: False)


def _tc_rules(theta: float, photon_cutoff: int) -> dict:
    """Rules on (q_l, a, c) for the symmetric block, ``theta = g t`` at ``mu = g``."""
    x = np.sqrt(2.0) * theta
    c, s = np.cos(x), np.sin(x)
    h = s / np.sqrt(2.0)
    rules: dict = {
        (0, 0, 0): {(0, 0, 0): 1.0},
        (0, 1, 0): {(0, 1, 0): 0.5 * (1 + c), (1, 0, 0): -0.5 * (1 - c), (0, 0, 1): -1j * h},
        (1, 0, 0): {(1, 0, 0): 0.5 * (1 + c), (0, 1, 0): -0.5 * (1 - c), (0, 0, 1): -1j * h},
        (0, 0, 1): {(0, 0, 1): c, (1, 0, 0): -1j * h, (0, 1, 0): -1j * h},
    }
    # one partner parked in |2> leaves an ordinary exchange for the other
    for (a, n), dsts in _jc_rules(theta).items():
        rules[(2, a, n)] = {(2, da, dn): amp for (da, dn), amp in dsts.items()}
        rules[(a, 2, n)] = {(da, 2, dn): amp for (da, dn), amp in dsts.items()}
    for n in range(photon_cutoff + 1):
        rules[(2, 2, n)] = {(2, 2, n): 1.0}
    return rules


def tc_map(
    psi: np.ndarray, l: int, theta: float, layout: SystemLayout, cavity: int | None = None
) -> np.ndarray:
    """Qutrit ``l`` and the ancilla sharing one cavity at equal couplings, ``theta = g t``.

    Only the ancilla row of the closed form is usually written down; the qutrit
    row follows from the ``l <-> a`` relabelling symmetry at ``mu = g``.  A
    partner sitting in |2> is off resonance, so the other qutrit performs a
    plain exchange with the cavity.
    """
    layout.check_qutrit(l)
    cav = layout.home_cavity(l) if cavity is None else cavity
    layout.check_cavity(cav)
    rules = _tc_rules(theta, layout.photon_cutoff)
    return _apply_rules(psi, layout, (f"q{l}", ANCILLA, f"c{cav}"), rules, lambda cfg: False)


def exact_propagator(h: sp.spmatrix | np.ndarray, t: float) -> np.ndarray:
    """Dense ``exp(-i H t)`` from a Hermitian eigendecomposition."""
    dim = h.shape[0]
    if dim > DENSE_DIM_LIMIT:
        raise ValueError(f"dimension {dim} exceeds the dense propagator limit {DENSE_DIM_LIMIT}")
    if not is_hermitian(h):
        raise ValueError("Hamiltonian is not Hermitian")
    dense = h.toarray() if sp.issparse(h) else np.asarray(h, dtype=complex)
    w, v = sla.eigh(0.5 * (dense + dense.conj().T))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def _check_equal_couplings(schedule: GateSchedule, qutrit: int, cavity: int) -> None:
    p = schedule.params
    mu, g = p.mu[qutrit - 1], p.g[cavity - 1]
    if not np.isclose(mu, g, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"closed-form two-qutrit map needs mu_{qutrit} == g_{cavity} (got ratio {mu / g:.6g}); "
            "use the numerical engine for unequal couplings"
        )


def apply_segment_ideal(segment, schedule: GateSchedule, psi: np.ndarray) -> np.ndarray:
    layout = schedule.layout
    p = schedule.params
    spec = segment.hamiltonian
    cls = segment.segment_class
    if cls is SegmentClass.PULSE:
        for q in spec.qutrits:
            psi = pulse_map(psi, q, p.omega[q - 1] * segment.duration, spec.phase, layout, spec.transition)
        return psi
    if cls is SegmentClass.TWO_QUTRIT_RESONANT:
        (q,) = spec.qutrits
        _check_equal_couplings(schedule, q, spec.cavity)
        return tc_map(psi, q, p.g[spec.cavity - 1] * segment.duration, layout, spec.cavity)
    if cls is SegmentClass.ANCILLA_ONLY_RESONANT:
        return jc_map(psi, spec.cavity, p.g[spec.cavity - 1] * segment.duration, layout)
    return psi


def apply_schedule_ideal(
    schedule: GateSchedule, psi: np.ndarray, snapshots: list | None = None
) -> np.ndarray:
    """Run ``psi`` through every segment with the closed-form maps.

    If ``snapshots`` is a list, ``(label, state)`` pairs are appended after
    each interaction segment.
    """
    psi = np.asarray(psi, dtype=complex).copy()
    for seg in schedule.segments:
        psi = apply_segment_ideal(seg, schedule, psi)
        if snapshots is not None and seg.segment_class.is_interaction:
            snapshots.append((seg.label, psi.copy()))
    return psi
