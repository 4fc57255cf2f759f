"""Global linear systems, row-block partitions, and per-machine data.

A system is the square invertible problem A x = b with a known solution
x_star.  Partitioning is contiguous by rows; callers that want a shuffled
assignment can permute rows beforehand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkernel
from .errors import (
    BadSizes,
    NotDivisible,
    ParseError,
    RankDeficient,
    RankDeficientBlock,
    SingularDraw,
)

_KEY_MASK = (1 << 128) - 1


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed directly by the seed, so
    streams derived from distinct keys never overlap."""
    return np.random.Generator(np.random.Philox(key=seed & _KEY_MASK))


@dataclass(frozen=True)
class LinearSystem:
    """Square system A x = b with known ground truth x_star."""

    a: np.ndarray
    b: np.ndarray
    x_star: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def validate(self, rtol: float = 1e-8) -> None:
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise ParseError("coefficient matrix must be square")
        if self.b.shape != (self.n,) or self.x_star.shape != (self.n,):
            raise ParseError("right-hand side / solution length mismatch")
        resid = float(np.sqrt(np.sum((self.a @ self.x_star - self.b) ** 2)))
        scale = float(np.sqrt(np.sum(self.b**2)))
        if resid > rtol * max(scale, 1e-300):
            raise ParseError("x_star does not solve A x = b within tolerance")


@dataclass(frozen=True)
class Partition:
    """Row-block sizes (p_1, ..., p_m) summing to n."""

    sizes: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        out = []
        acc = 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return tuple(out)


@dataclass(frozen=True)
class MachineData:
    """One machine's equation block and its derived geometry.

    basis (V_i) has orthonormal columns spanning the row space of a_block;
    nullspace_proj (P_i) is I - V_i V_i^T; pinv is the Moore-Penrose
    pseudo-inverse A_i^T (A_i A_i^T)^{-1}, used for minimum-norm local
    solutions and row-block projections.
    """

    index: int
    a_block: np.ndarray
    b_block: np.ndarray
    nullspace_proj: np.ndarray
    basis: np.ndarray
    pinv: np.ndarray

    @property
    def p(self) -> int:
        return self.a_block.shape[0]

    def project_nullspace(self, vec: np.ndarray) -> np.ndarray:
        """P_i @ vec without materializing P_i: vec - V (V^T vec)."""
        return vec - self.basis @ (self.basis.T @ vec)


def draw_gaussian(
    rng: np.random.Generator, n: int, mean: float, stddev: float
) -> LinearSystem:
    """One draw from the i.i.d. Gaussian ensemble using an existing stream.

    Draw order is pinned: the n*n coefficients first, then the n entries of
    x_star (standard normal); b = A @ x_star.  Raises SingularDraw when A
    fails the rank tolerance; callers may redraw from the same stream.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if stddev <= 0:
        raise ValueError("stddev must be > 0")
    a = rng.normal(mean, stddev, size=(n, n))
    x_star = rng.normal(0.0, 1.0, size=n)
    try:
        numkernel.qr_decompose(a)
    except RankDeficient as exc:
        raise SingularDraw(str(exc)) from exc
    return LinearSystem(a=a, b=a @ x_star, x_star=x_star)


def generate_gaussian(n: int, mean: float, stddev: float, seed: int) -> LinearSystem:
    """Deterministic Gaussian system for a fixed seed."""
    return draw_gaussian(rng_from_seed(seed), n, mean, stddev)


def from_matrix(a: np.ndarray, b: np.ndarray | None = None,
                x_star: np.ndarray | None = None) -> LinearSystem:
    """Wrap an explicit matrix into a LinearSystem, deriving whichever of
    b / x_star is missing (x_star via QR solve)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParseError("coefficient matrix must be square")
    if x_star is None and b is None:
        raise ValueError("need b or x_star")
    if x_star is None:
        q, r = numkernel.qr_decompose(a)
        x_star = numkernel.triangular_solve(r, q.T @ np.asarray(b, dtype=float))
    x_star = np.asarray(x_star, dtype=float)
    if b is None:
        b = a @ x_star
    sys = LinearSystem(a=a, b=np.asarray(b, dtype=float), x_star=x_star)
    sys.validate()
    return sys


def partition_even(sys: LinearSystem, m: int) -> Partition:
    if m < 1 or sys.n % m != 0:
        raise NotDivisible(f"m={m} does not divide n={sys.n}")
    p = sys.n // m
    return Partition(sizes=(p,) * m)


def partition_custom(sys: LinearSystem, sizes) -> Partition:
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 1 for s in sizes) or sum(sizes) != sys.n:
        raise BadSizes(f"sizes {sizes} must be positive and sum to n={sys.n}")
    return Partition(sizes=sizes)


def build_machines(sys: LinearSystem, part: Partition) -> list[MachineData]:
    """Split (A, b) into row blocks and attach projector geometry.

    Concatenating the a_block / b_block fields in order reproduces (A, b)
    bit-exactly.  Raises RankDeficientBlock(i) when block i has dependent
    rows.
    """
    machines = []
    for i, (off, p) in enumerate(zip(part.offsets, part.sizes)):
        a_block = sys.a[off : off + p].copy()
        b_block = sys.b[off : off + p].copy()
        try:
            basis, r = numkernel.qr_decompose(a_block.T)
        except RankDeficient as exc:
            raise RankDeficientBlock(i, f"machine {i}: {exc}") from exc
        # A_i^T (A_i A_i^T)^{-1} = V R^{-T}; with A_i^T = V R this solves
        # the minimum-norm local problem in one matmul later on.
        rinv_t = numkernel.triangular_solve(r.T, np.eye(p), lower=True)
        pinv = basis @ rinv_t
        proj = np.eye(sys.n) - basis @ basis.T
        machines.append(
            MachineData(
                index=i,
                a_block=a_block,
                b_block=b_block,
                nullspace_proj=0.5 * (proj + proj.T),
                basis=basis,
                pinv=pinv,
            )
        )
    return machines


def build_S(machines: list[MachineData]) -> np.ndarray:
    """Sum over machines of the rowspace projectors: S = sum_i V_i V_i^T."""
    if not machines:
        raise ValueError("need at least one machine")
    n = machines[0].basis.shape[0]
    s = np.zeros((n, n))
    for mach in machines:
        if mach.basis.shape[0] != n:
            raise BadSizes("machines disagree on ambient dimension")
        s += mach.basis @ mach.basis.T
    return 0.5 * (s + s.T)


# ---------------------------------------------------------------------------
# Plain-text matrix/vector files: first line "rows cols", then row-major
# entries at 17 significant digits (bit-exact round trip for float64).
# ---------------------------------------------------------------------------


def save_matrix(path, a: np.ndarray) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")


def load_matrix(path) -> np.ndarray:
    try:
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ParseError(f"{path}: expected 'rows cols' header")
            rows, cols = int(header[0]), int(header[1])
            data = fh.read().split()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: malformed header") from exc
    if len(data) != rows * cols:
        raise ParseError(
            f"{path}: expected {rows * cols} entries, found {len(data)}"
        )
    try:
        flat = np.array([float(tok) for tok in data], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric entry") from exc
    if not np.all(np.isfinite(flat)):
        raise ParseError(f"{path}: non-finite entry")
    return flat.reshape(rows, cols)


def save_vector(path, v: np.ndarray) -> None:
    save_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1))


def load_vector(path) -> np.ndarray:
    a = load_matrix(path)
    if a.shape[1] != 1:
        raise ParseError(f"{path}: expected a single-column vector file")
    return a[:, 0]
