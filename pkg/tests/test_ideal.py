from __future__ import annotations

import itertools

import numpy as np
import pytest

from cavitygate.analysis import expected_phase
from cavitygate.hamiltonian import (
    h_pulse_ideal,
    h_qutrit_cavity_ideal,
    h_two_qutrit_cavity_ideal,
    default_params,
)
from cavitygate.hilbert import SystemLayout, basis_state
from cavitygate.ideal import (
    SectorError,
    apply_schedule_ideal,
    exact_propagator,
    jc_map,
    pulse_map,
    tc_map,
)
from cavitygate.schedule import compile_3qubit, compile_nqubit

L = SystemLayout(2, 1, 1)  # q1, q2, a, c1


def ket(*labels):
    return basis_state(labels, L)


def random_state(rng, configs):
    """Random normalised superposition over (q1, q2, a, c1) label tuples."""
    psi = np.zeros(L.total_dim, dtype=complex)
    for cfg in configs:
        psi[L.index(cfg)] = rng.normal() + 1j * rng.normal()
    return psi / np.linalg.norm(psi)


# sectors on which each closed form is defined
JC_SECTOR = [(q1, q2, a, c) for q1 in range(3) for q2 in range(3) for a, c in [(0, 0), (1, 0), (0, 1)]]
TC_LOCAL = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (0, 0, 1), (2, 0, 0), (2, 1, 0), (2, 0, 1), (0, 2, 0), (1, 2, 0),
            (0, 2, 1), (2, 2, 0), (2, 2, 1)]
TC_SECTOR = [(q1, q2, a, c) for (q1, a, c) in TC_LOCAL for q2 in range(3)]


class TestPulseMap:
    def test_raise_one_to_two(self):
        out = pulse_map(ket(0, 1, 0, 0), 2, np.pi / 2, -np.pi / 2, L)
        assert np.allclose(out, ket(0, 2, 0, 0), atol=1e-15)

    def test_lower_two_to_one(self):
        out = pulse_map(ket(1, 2, 0, 0), 2, np.pi / 2, np.pi / 2, L)
        assert np.allclose(out, ket(1, 1, 0, 0), atol=1e-15)

    def test_zero_area_is_identity(self):
        psi = random_state(np.random.default_rng(0), [L.labels(i) for i in range(54)])
        assert np.array_equal(pulse_map(psi, 1, 0.0, 0.3, L), psi)

    def test_ground_untouched(self):
        psi = ket(0, 0, 1, 0)
        assert np.array_equal(pulse_map(psi, 2, 1.1, 0.0, L), psi)

    def test_rejects_negative_area(self):
        with pytest.raises(ValueError):
            pulse_map(ket(0, 0, 0, 0), 2, -0.1, 0.0, L)

    def test_rejects_bad_transition(self):
        with pytest.raises(ValueError):
            pulse_map(ket(0, 0, 0, 0), 2, 0.1, 0.0, L, transition=(1, 1))


class TestJcMap:
    def test_pi_gives_sign(self):
        assert np.allclose(jc_map(ket(0, 0, 1, 0), 1, np.pi, L), -ket(0, 0, 1, 0), atol=1e-15)

    def test_two_pi_is_identity(self):
        psi = random_state(np.random.default_rng(1), JC_SECTOR)
        assert np.allclose(jc_map(psi, 1, 2 * np.pi, L), psi, atol=1e-14)

    def test_half_pi_moves_photon(self):
        assert np.allclose(jc_map(ket(0, 0, 1, 0), 1, np.pi / 2, L), -1j * ket(0, 0, 0, 1), atol=1e-15)

    def test_out_of_sector(self):
        with pytest.raises(SectorError):
            jc_map(ket(0, 0, 2, 0), 1, 0.3, L)

    def test_small_outside_amplitude_is_tolerated(self):
        psi = ket(0, 0, 1, 0) + 1e-14 * ket(0, 0, 2, 0)
        jc_map(psi, 1, 0.3, L)


class TestTcMap:
    def test_qutrit_to_ancilla(self):
        out = tc_map(ket(1, 0, 0, 0), 1, np.pi / np.sqrt(2), L)
        assert np.allclose(out, -ket(0, 0, 1, 0), atol=1e-15)

    def test_ancilla_to_qutrit(self):
        out = tc_map(ket(0, 0, 1, 0), 1, np.pi / np.sqrt(2), L)
        assert np.allclose(out, -ket(1, 0, 0, 0), atol=1e-15)

    def test_quarter_period(self):
        out = tc_map(ket(0, 0, 1, 0), 1, np.pi / 2 / np.sqrt(2), L)
        expected = 0.5 * ket(0, 0, 1, 0) - 1j * np.sqrt(0.5) * ket(0, 0, 0, 1) - 0.5 * ket(1, 0, 0, 0)
        assert np.allclose(out, expected, atol=1e-15)

    def test_full_period_identity(self):
        psi = random_state(np.random.default_rng(2), TC_SECTOR[:12])
        assert np.allclose(tc_map(psi, 1, 2 * np.pi / np.sqrt(2), L), psi, atol=1e-14)

    def test_doubly_excited_rejected(self):
        with pytest.raises(SectorError):
            tc_map(ket(1, 0, 1, 0), 1, 0.4, L)


def oracle_cases():
    p = default_params(2, cavity_count=1)
    rng = np.random.default_rng(2024)
    times = rng.uniform(0, 2e-7, size=20)
    all_cfg = [L.labels(i) for i in range(54)]
    yield from (
        ("pulse", t, h_pulse_ideal(2, p, L, phi=0.7), all_cfg,
         lambda psi, t=t: pulse_map(psi, 2, p.omega[1] * t, 0.7, L))
        for t in times
    )
    yield from (
        ("jc", t, h_qutrit_cavity_ideal(1, p, L), JC_SECTOR, lambda psi, t=t: jc_map(psi, 1, p.g[0] * t, L))
        for t in times
    )
    yield from (
        ("tc", t, h_two_qutrit_cavity_ideal(1, p, L), TC_SECTOR, lambda psi, t=t: tc_map(psi, 1, p.g[0] * t, L))
        for t in times
    )


@pytest.mark.parametrize("name, t, h, sector, closed", list(oracle_cases()),
                         ids=[f"{c[0]}-{i % 20}" for i, c in enumerate(oracle_cases())])
def test_closed_forms_match_propagator(name, t, h, sector, closed):
    psi = random_state(np.random.default_rng(int(t * 1e12)), sector)
    exact = exact_propagator(h, t) @ psi
    out = closed(psi)
    assert np.max(np.abs(out - exact)) < 1e-9
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)


class TestPropagator:
    def test_identity_at_zero(self, params54):
        u = exact_propagator(h_two_qutrit_cavity_ideal(1, params54, L), 0.0)
        assert np.allclose(u, np.eye(54), atol=1e-12)

    def test_group_property(self, params54):
        h = h_two_qutrit_cavity_ideal(1, params54, L)
        t1, t2 = 13e-9, 27e-9
        assert np.allclose(exact_propagator(h, t1) @ exact_propagator(h, t2), exact_propagator(h, t1 + t2), atol=1e-9)

    def test_tc_pi_time(self, params54):
        u = exact_propagator(h_two_qutrit_cavity_ideal(1, params54, L), np.pi / (np.sqrt(2) * params54.g[0]))
        assert np.allclose(u @ ket(1, 0, 0, 0), tc_map(ket(1, 0, 0, 0), 1, np.pi / np.sqrt(2), L), atol=1e-9)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            exact_propagator(np.array([[0, 1], [0, 0]]), 1.0)

    def test_dimension_guard(self):
        import scipy.sparse as sp

        with pytest.raises(ValueError, match="limit"):
            exact_propagator(sp.identity(3001), 1.0)


@pytest.fixture(scope="module")
def sched3():
    return compile_3qubit(default_params(3))


class TestSchedules:
    def _comp(self, layout, bits):
        return basis_state(tuple(bits) + (0,) * (len(layout.dims) - len(bits)), layout)

    def test_all_ones_negated(self, sched3):
        psi = self._comp(sched3.layout, (1, 1, 1))
        assert np.allclose(apply_schedule_ideal(sched3, psi), -psi, atol=1e-12)

    def test_zero_one_one_unchanged(self, sched3):
        psi = self._comp(sched3.layout, (0, 1, 1))
        assert np.allclose(apply_schedule_ideal(sched3, psi), psi, atol=1e-12)

    def test_state_after_step_two(self, sched3):
        snaps: list = []
        apply_schedule_ideal(sched3, self._comp(sched3.layout, (1, 0, 0)), snapshots=snaps)
        label, state = snaps[1]
        assert label.startswith("Step2")
        expected = basis_state((0, 0, 0, 1, 0, 0, 0), sched3.layout)
        assert np.allclose(state, -expected, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_phase_rule(self, n):
        sched = compile_nqubit(n, default_params(n))
        for bits in itertools.product((0, 1), repeat=n):
            psi = self._comp(sched.layout, bits)
            out = apply_schedule_ideal(sched, psi)
            assert np.max(np.abs(out - expected_phase(bits) * psi)) < 1e-10

    def test_superposition_linear(self, sched3):
        rng = np.random.default_rng(5)
        states = [self._comp(sched3.layout, b) for b in itertools.product((0, 1), repeat=3)]
        coef = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi = sum(c * s for c, s in zip(coef, states))
        out = apply_schedule_ideal(sched3, psi)
        assert np.allclose(out, sum(c * apply_schedule_ideal(sched3, s) for c, s in zip(coef, states)))

    def test_unequal_couplings_rejected(self):
        sched = compile_nqubit(3, default_params(3).with_coupling_ratio(1.02))
        with pytest.raises(ValueError, match="mu"):
            apply_schedule_ideal(sched, self._comp(sched.layout, (1, 1, 1)))
