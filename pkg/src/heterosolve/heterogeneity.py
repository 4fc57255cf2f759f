"""Angular data-heterogeneity metrics.

All angles are in radians inside the library; the CLI converts to degrees
for display only.  Cosines are clamped to [0, 1] before arccos to guard
against floating-point overshoot.  phi is None (undefined) for machines
holding a single equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkernel
from .errors import DimensionMismatch, TooFewMachines, ZeroRow
from .system import MachineData

ZERO_ROW_TOL = 1e-14


def _clamped_arccos(c: float) -> float:
    return float(np.arccos(min(1.0, max(0.0, c))))


def _max_singular_value(g: np.ndarray) -> float:
    """sigma_max(g) via the symmetric spectrum of the smaller Gram matrix."""
    if g.size == 0:
        return 0.0
    gram = g @ g.T if g.shape[0] <= g.shape[1] else g.T @ g
    w = numkernel.symmetric_spectrum(gram)
    return float(np.sqrt(max(float(w[0]), 0.0)))


def subspace_angle(v_i: np.ndarray, v_j: np.ndarray) -> float:
    """Minimal principal angle between two subspaces given orthonormal
    column bases with a common ambient dimension.

    The operands are put in a canonical order first so the result is
    bitwise identical under argument swap.
    """
    v_i = np.asarray(v_i, dtype=float)
    v_j = np.asarray(v_j, dtype=float)
    if v_i.ndim != 2 or v_j.ndim != 2 or v_i.shape[0] != v_j.shape[0]:
        raise DimensionMismatch(
            f"bases live in different spaces: {v_i.shape} vs {v_j.shape}"
        )
    if (v_i.shape[1], v_i.tobytes()) > (v_j.shape[1], v_j.tobytes()):
        v_i, v_j = v_j, v_i
    return _clamped_arccos(_max_singular_value(v_i.T @ v_j))


def pairwise_angles(machines: list[MachineData]) -> np.ndarray:
    """Symmetric m x m table of minimal angles between local data spaces;
    the diagonal is NaN (unused)."""
    m = len(machines)
    table = np.full((m, m), np.nan)
    for i in range(m):
        for j in range(i + 1, m):
            ang = subspace_angle(machines[i].basis, machines[j].basis)
            table[i, j] = ang
            table[j, i] = ang
    return table


def cross_machine_heterogeneity(machines: list[MachineData]) -> float:
    """Smallest pairwise subspace angle, i.e. arccos of the largest
    pairwise cosine similarity."""
    if len(machines) < 2:
        raise TooFewMachines("cross-machine heterogeneity needs m >= 2")
    table = pairwise_angles(machines)
    return float(np.nanmin(table))


def _row_cosines(a: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(a * a, axis=1))
    if np.any(norms < ZERO_ROW_TOL):
        bad = int(np.argmin(norms))
        raise ZeroRow(f"row {bad} has near-zero norm")
    unit = a / norms[:, None]
    return np.abs(unit @ unit.T)


def local_heterogeneity(machine: MachineData) -> float | None:
    """Minimal angle between any two coefficient rows held by one machine;
    None when the machine holds a single equation (no pair exists)."""
    a = machine.a_block
    if a.shape[0] < 2:
        return None
    cos = _row_cosines(a)
    iu = np.triu_indices(a.shape[0], k=1)
    return _clamped_arccos(float(np.max(cos[iu])))


def row_min_angles(a: np.ndarray) -> np.ndarray:
    """Per-row minimal angle against every other row of a square matrix."""
    a = np.asarray(a, dtype=float)
    cos = _row_cosines(a)
    np.fill_diagonal(cos, -np.inf)
    best = np.max(cos, axis=1)
    return np.array([_clamped_arccos(float(c)) for c in best])


@dataclass(frozen=True)
class HeterogeneityReport:
    """All angular metrics for one partitioned system (radians).

    theta_pairwise has a NaN diagonal; phi_local holds None for
    single-equation machines; phi_min is None when every entry is None.
    theta_h is None for m = 1 (no machine pair exists).
    """

    theta_pairwise: np.ndarray
    theta_h: float | None
    phi_local: tuple[float | None, ...]
    phi_min: float | None
    theta_min_row: np.ndarray

    def to_dict(self) -> dict:
        m = self.theta_pairwise.shape[0]
        table = [
            [None if i == j else float(self.theta_pairwise[i, j]) for j in range(m)]
            for i in range(m)
        ]
        return {
            "theta_pairwise_rad": table,
            "theta_h_rad": self.theta_h,
            "phi_local_rad": list(self.phi_local),
            "phi_min_rad": self.phi_min,
            "theta_min_row_rad": [float(x) for x in self.theta_min_row],
        }


def compute_report(machines: list[MachineData]) -> HeterogeneityReport:
    """Aggregate every metric from per-machine data; the global matrix is
    recovered by stacking the blocks."""
    a = np.vstack([mach.a_block for mach in machines])
    table = pairwise_angles(machines)
    theta_h = float(np.nanmin(table)) if len(machines) >= 2 else None
    phis = tuple(local_heterogeneity(mach) for mach in machines)
    defined = [p for p in phis if p is not None]
    phi_min = min(defined) if defined else None
    return HeterogeneityReport(
        theta_pairwise=table,
        theta_h=theta_h,
        phi_local=phis,
        phi_min=phi_min,
        theta_min_row=row_min_angles(a),
    )
