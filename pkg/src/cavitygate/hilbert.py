"""Composite Hilbert spaces of qutrits and truncated cavity modes.

Subsystems are addressed by short string ids: ``"q1" ... "qn"`` for the work
qutrits, ``"a"`` for the ancilla (coupler) qutrit and ``"c1" ... "ck"`` for the
cavity modes.  The canonical tensor ordering is always

    q1, q2, ..., qn, a, c1, ..., ck

and every index computation in the package goes through :class:`SystemLayout`.
Operators are ``scipy.sparse.csr_matrix``; states are 1-D complex arrays and
density matrices dense 2-D complex arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

QUTRIT_DIM = 3
ANCILLA = "a"


@dataclass(frozen=True)
class SystemLayout:
    """Which subsystems exist and how they are ordered.

    Args:
        work_qutrit_count: number ``n`` of work qutrits (qubits of the gate), ``n >= 2``.
        cavity_count: number of cavity modes. ``n`` for the multi-cavity
            protocol, ``1`` for the single-cavity (moving atoms) variant.
            Defaults to ``n``.
        photon_cutoff: maximum photon number kept per cavity (``n_max``).
    """

    work_qutrit_count: int
    cavity_count: int | None = None
    photon_cutoff: int = 1

    def __post_init__(self):
        n = self.work_qutrit_count
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ValueError(f"work_qutrit_count must be an integer >= 2, got {n!r}")
        if self.cavity_count is None:
            object.__setattr__(self, "cavity_count", int(n))
        k = self.cavity_count
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValueError(f"cavity_count must be an integer >= 1, got {k!r}")
        if k not in (1, n):
            raise ValueError(
                f"cavity_count must be 1 (shared cavity) or n={n} (one cavity per qutrit), got {k}"
            )
        if not isinstance(self.photon_cutoff, (int, np.integer)) or self.photon_cutoff < 1:
            raise ValueError(f"photon_cutoff must be an integer >= 1, got {self.photon_cutoff!r}")

    @property
    def ancilla_present(self) -> bool:
        return True

    @cached_property
    def subsystems(self) -> tuple[str, ...]:
        qs = tuple(f"q{i}" for i in range(1, self.work_qutrit_count + 1))
        cs = tuple(f"c{i}" for i in range(1, self.cavity_count + 1))
        return qs + (ANCILLA,) + cs

    @cached_property
    def dims(self) -> tuple[int, ...]:
        nq = self.work_qutrit_count + 1
        return (QUTRIT_DIM,) * nq + (self.photon_cutoff + 1,) * self.cavity_count

    @cached_property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @cached_property
    def strides(self) -> tuple[int, ...]:
        out = []
        acc = 1
        for d in reversed(self.dims):
            out.append(acc)
            acc *= d
        return tuple(reversed(out))

    def axis(self, subsystem: str) -> int:
        """Position of ``subsystem`` in the canonical ordering."""
        try:
            return self.subsystems.index(subsystem)
        except ValueError:
            raise KeyError(f"unknown subsystem {subsystem!r}; layout has {self.subsystems}") from None

    def local_dim(self, subsystem: str) -> int:
        return self.dims[self.axis(subsystem)]

    def home_cavity(self, qutrit: int) -> int:
        """Cavity that work qutrit ``qutrit`` (1-based) couples to."""
        self.check_qutrit(qutrit)
        return qutrit if self.cavity_count == self.work_qutrit_count else 1

    def check_qutrit(self, l: int) -> None:
        if not 1 <= l <= self.work_qutrit_count:
            raise ValueError(f"work qutrit index must be in 1..{self.work_qutrit_count}, got {l}")

    def check_cavity(self, l: int) -> None:
        if not 1 <= l <= self.cavity_count:
            raise ValueError(f"cavity index must be in 1..{self.cavity_count}, got {l}")

    def index(self, labels: Sequence[int]) -> int:
        """Flat index of the product basis state with the given local labels."""
        if len(labels) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} labels, got {len(labels)}")
        for lab, d, name in zip(labels, self.dims, self.subsystems):
            if not 0 <= lab < d:
                raise ValueError(f"label {lab} out of range for {name} (local dim {d})")
        return int(sum(lab * s for lab, s in zip(labels, self.strides)))

    def labels(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(index, self.dims))

    def to_dict(self) -> dict:
        return {
            "work_qutrit_count": self.work_qutrit_count,
            "cavity_count": self.cavity_count,
            "photon_cutoff": self.photon_cutoff,
        }


@dataclass(frozen=True)
class SpaceDescriptor:
    subsystems: tuple[str, ...]
    dims: tuple[int, ...]
    strides: tuple[int, ...]
    total_dim: int


def build_space(layout: SystemLayout) -> SpaceDescriptor:
    return SpaceDescriptor(layout.subsystems, layout.dims, layout.strides, layout.total_dim)


def transition_op(i: int, j: int) -> sp.csr_matrix:
    """Local qutrit operator ``|i><j|``."""
    for lev in (i, j):
        if lev not in (0, 1, 2):
            raise ValueError(f"qutrit level must be 0, 1 or 2, got {lev!r}")
    return sp.csr_matrix(([1.0 + 0j], ([i], [j])), shape=(QUTRIT_DIM, QUTRIT_DIM))


def annihilation_op(n_max: int) -> sp.csr_matrix:
    """Truncated bosonic lowering operator on ``n_max + 1`` Fock states."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    k = np.arange(1, n_max + 1)
    return sp.csr_matrix(
        (np.sqrt(k).astype(complex), (k - 1, k)), shape=(n_max + 1, n_max + 1)
    )


def embed(local: sp.spmatrix | np.ndarray, subsystem: str, layout: SystemLayout) -> sp.csr_matrix:
    """Kronecker-embed a local operator with identities on all other subsystems."""
    ax = layout.axis(subsystem)
    d = layout.dims[ax]
    local = sp.csr_matrix(local, dtype=complex)
    if local.shape != (d, d):
        raise ValueError(f"operator shape {local.shape} does not match {subsystem} local dim {d}")
    left = int(np.prod(layout.dims[:ax]))
    right = int(np.prod(layout.dims[ax + 1 :]))
    out = sp.kron(sp.identity(left, dtype=complex, format="csr"), local, format="csr")
    out = sp.kron(out, sp.identity(right, dtype=complex, format="csr"), format="csr")
    out.sum_duplicates()
    return out


def basis_state(labels: Sequence[int], layout: SystemLayout) -> np.ndarray:
    """Product basis vector, labels given in canonical subsystem order."""
    psi = np.zeros(layout.total_dim, dtype=complex)
    psi[layout.index(labels)] = 1.0
    return psi


def product_labels(
    layout: SystemLayout,
    qutrits: Sequence[int],
    ancilla: int = 0,
    photons: Sequence[int] | None = None,
) -> tuple[int, ...]:
    """Assemble a canonical label tuple from grouped levels."""
    if len(qutrits) != layout.work_qutrit_count:
        raise ValueError(f"expected {layout.work_qutrit_count} qutrit levels, got {len(qutrits)}")
    if photons is None:
        photons = (0,) * layout.cavity_count
    if len(photons) != layout.cavity_count:
        raise ValueError(f"expected {layout.cavity_count} photon numbers, got {len(photons)}")
    return tuple(qutrits) + (ancilla,) + tuple(photons)


def is_hermitian(op: sp.spmatrix | np.ndarray, atol: float = 1e-12) -> bool:
    diff = op - op.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= atol
    return float(np.max(np.abs(diff))) <= atol


def check_state_vector(psi: np.ndarray, layout: SystemLayout | None = None, atol: float = 1e-10) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"state vector must be 1-D, got shape {psi.shape}")
    if layout is not None and psi.shape[0] != layout.total_dim:
        raise ValueError(f"state dim {psi.shape[0]} does not match layout dim {layout.total_dim}")
    if abs(np.linalg.norm(psi) - 1.0) > atol:
        raise ValueError(f"state vector is not normalised (norm {np.linalg.norm(psi):.3e})")
    return psi


def check_density_matrix(
    rho: np.ndarray,
    layout: SystemLayout | None = None,
    *,
    trace_tol: float = 1e-8,
    herm_tol: float = 1e-10,
    psd_tol: float = 1e-7,
    check_psd: bool = False,
) -> np.ndarray:
    """Validate a density matrix; positivity is only checked on request (eigensolver)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if layout is not None and rho.shape[0] != layout.total_dim:
        raise ValueError(f"density matrix dim {rho.shape[0]} does not match layout dim {layout.total_dim}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace is {tr:.12g}, expected 1")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > herm_tol:
        raise ValueError(f"density matrix is not Hermitian (max deviation {herm:.3e})")
    if check_psd:
        lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if lam < -psd_tol:
            raise ValueError(f"density matrix has negative eigenvalue {lam:.3e}")
    return rho


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())
