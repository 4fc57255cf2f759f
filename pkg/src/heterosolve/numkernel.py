"""Dense linear-algebra primitives: QR, symmetric/general eigenvalues,
projectors, condition numbers.

Everything is implemented in-module on top of plain numpy array arithmetic
(no numpy.linalg factorizations) so results are deterministic for a given
numpy build and the rank tolerances are under our control.  Sizes of
interest are dense n <= ~500.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NotSymmetric, RankDeficient, Singular

# Relative rank tolerance: a diagonal of R below RANK_RTOL * ||M||_F means
# rank deficient.  The spec'd invertibility assumption needs a concrete cut.
RANK_RTOL = 1e-12
SYMMETRY_ATOL = 1e-10

_EPS = np.finfo(float).eps


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _fro(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a)))


def is_symmetric(m, tol: float = SYMMETRY_ATOL) -> bool:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    return float(np.max(np.abs(a - a.T))) <= tol * scale if a.size else True


# ---------------------------------------------------------------------------
# Householder QR
# ---------------------------------------------------------------------------


def _householder_vector(x: np.ndarray):
    """Reflector v, beta with (I - beta v v^T) x = -copysign(||x||, x0) e1."""
    nx = float(np.sqrt(x @ x))
    if nx == 0.0:
        return None, 0.0
    v = x.copy()
    v[0] += math.copysign(nx, x[0]) if x[0] != 0.0 else nx
    beta = 2.0 / float(v @ v)
    return v, beta


def qr_decompose(m):
    """Thin Householder QR of a square or tall matrix.

    Returns (q, r) with q having orthonormal columns, r upper triangular
    with nonnegative diagonal, and q @ r == m to roundoff.

    Raises RankDeficient when a diagonal of R falls below
    RANK_RTOL * ||m||_F (column rank loss), or when m is wide.
    """
    a = _as_matrix(m)
    rows, cols = a.shape
    if rows < cols:
        raise RankDeficient(f"{rows}x{cols} matrix cannot have full column rank")
    r = a.copy()
    reflectors = []
    for k in range(cols):
        v, beta = _householder_vector(r[k:, k])
        if v is not None:
            r[k:, k:] -= beta * np.outer(v, v @ r[k:, k:])
            r[k + 1 :, k] = 0.0
        reflectors.append((v, beta))
    q = np.eye(rows, cols)
    for k in range(cols - 1, -1, -1):
        v, beta = reflectors[k]
        if v is not None:
            q[k:, :] -= beta * np.outer(v, v @ q[k:, :])
    # make diag(R) >= 0 so r_kk are Gram-Schmidt residual norms
    signs = np.where(np.diag(r)[:cols] < 0.0, -1.0, 1.0)
    r = signs[:, None] * r[:cols, :]
    q = q * signs[None, :]
    tol = RANK_RTOL * _fro(a)
    if np.any(np.diag(r) <= tol):
        raise RankDeficient(
            f"diagonal of R below {RANK_RTOL:g} * ||M||: rank deficient"
        )
    return q, r


def triangular_solve(r, b, lower: bool = False):
    """Solve r @ x = b for triangular r by substitution.  b may be a
    vector or a matrix of right-hand sides."""
    r = _as_matrix(r)
    n = r.shape[0]
    if r.shape[1] != n:
        raise ValueError("triangular matrix must be square")
    b_arr = np.asarray(b, dtype=float)
    vec = b_arr.ndim == 1
    x = b_arr.reshape(n, -1).copy()
    diag = np.diag(r)
    if np.any(diag == 0.0):
        raise RankDeficient("zero diagonal in triangular solve")
    order = range(n) if lower else range(n - 1, -1, -1)
    for i in order:
        if lower:
            x[i] = (x[i] - r[i, :i] @ x[:i]) / diag[i]
        else:
            x[i] = (x[i] - r[i, i + 1 :] @ x[i + 1 :]) / diag[i]
    return x[:, 0] if vec else x


# ---------------------------------------------------------------------------
# Symmetric eigensolver: Householder tridiagonalization + implicit-shift QL
# ---------------------------------------------------------------------------


def _tridiagonalize(a: np.ndarray, want_vectors: bool):
    """Reduce symmetric a to tridiagonal (d, e); optionally accumulate the
    orthogonal transform z with a = z T z^T."""
    n = a.shape[0]
    t = a.copy()
    z = np.eye(n) if want_vectors else None
    for k in range(n - 2):
        v, beta = _householder_vector(t[k + 1 :, k].copy())
        if v is None:
            continue
        block = t[k + 1 :, k + 1 :]
        p = beta * (block @ v)
        q = p - (0.5 * beta * float(v @ p)) * v
        block -= np.outer(q, v) + np.outer(v, q)
        sub = t[k + 1 :, k] - beta * v * float(v @ t[k + 1 :, k])
        t[k + 1 :, k] = sub
        t[k, k + 1 :] = sub
        t[k + 2 :, k] = 0.0
        t[k, k + 2 :] = 0.0
        if z is not None:
            z[:, k + 1 :] -= np.outer(z[:, k + 1 :] @ v, beta * v)
    d = np.diag(t).copy()
    e = np.array([t[i + 1, i] for i in range(n - 1)], dtype=float)
    return d, e, z


def _tql(d: np.ndarray, e: np.ndarray, z, max_sweeps: int = 64):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.
    Mutates d (eigenvalues) and optionally the column matrix z."""
    n = d.size
    if n <= 1:
        return
    ee = np.zeros(n)
    ee[: n - 1] = e
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(ee[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise RuntimeError("tridiagonal QL failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * ee[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + ee[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * ee[i]
                b = c * ee[i]
                r = math.hypot(f, g)
                ee[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    ee[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * col
                    z[:, i] = c * z[:, i] - s * col
            if underflow:
                continue
            d[l] -= p
            ee[l] = g
            ee[m] = 0.0


def _check_symmetric(m) -> np.ndarray:
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1] or not is_symmetric(a):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    return 0.5 * (a + a.T)


def symmetric_eigh(m):
    """Eigen-decomposition of a symmetric matrix.

    Returns (w, u) with eigenvalues w sorted descending and orthonormal
    eigenvector columns u, so that m == u @ diag(w) @ u.T to roundoff.
    """
    a = _check_symmetric(m)
    d, e, z = _tridiagonalize(a, want_vectors=True)
    _tql(d, e, z)
    order = np.argsort(d)[::-1]
    return d[order], z[:, order]


def symmetric_spectrum(m) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted descending."""
    a = _check_symmetric(m)
    d, e, _ = _tridiagonalize(a, want_vectors=False)
    _tql(d, e, None)
    return np.sort(d)[::-1]


# ---------------------------------------------------------------------------
# General (nonsymmetric) eigenvalues: Hessenberg + complex shifted QR
# ---------------------------------------------------------------------------


def _hessenberg(a: np.ndarray) -> np.ndarray:
    h = a.copy()
    n = h.shape[0]
    for k in range(n - 2):
        v, beta = _householder_vector(h[k + 1 :, k].copy())
        if v is None:
            continue
        h[k + 1 :, k:] -= beta * np.outer(v, v @ h[k + 1 :, k:])
        h[:, k + 1 :] -= beta * np.outer(h[:, k + 1 :] @ v, v)
        h[k + 2 :, k] = 0.0
    return h


def _eig2(block: np.ndarray):
    """Eigenvalues of a 2x2 (possibly complex) matrix."""
    tr = block[0, 0] + block[1, 1]
    det = block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0]
    disc = np.sqrt(complex(tr * tr - 4.0 * det))
    return (tr + disc) / 2.0, (tr - disc) / 2.0


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a square real matrix (complex array, unordered
    beyond deflation order)."""
    a = _as_matrix(m)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError("eigenvalues need a square matrix")
    if n == 0:
        return np.array([], dtype=complex)
    if n == 1:
        return a[0, :1].astype(complex)
    if is_symmetric(a):
        return symmetric_spectrum(a).astype(complex)
    h = _hessenberg(a).astype(complex)
    scale = max(1.0, float(np.max(np.abs(h))))
    evs = []
    hi = n
    stuck = 0
    budget = 200 * n + 2000
    while hi > 0:
        if hi == 1:
            evs.append(h[0, 0])
            break
        lo = hi - 1
        while lo > 0:
            tol = _EPS * (abs(h[lo - 1, lo - 1]) + abs(h[lo, lo]))
            if tol == 0.0:
                tol = _EPS * scale
            if abs(h[lo, lo - 1]) <= tol:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi - 1:
            evs.append(h[hi - 1, hi - 1])
            hi -= 1
            stuck = 0
            continue
        if lo == hi - 2:
            evs.extend(_eig2(h[hi - 2 : hi, hi - 2 : hi]))
            hi -= 2
            stuck = 0
            continue
        budget -= 1
        if budget < 0:
            raise RuntimeError("QR eigenvalue iteration failed to converge")
        stuck += 1
        mu1, mu2 = _eig2(h[hi - 2 : hi, hi - 2 : hi])
        corner = h[hi - 1, hi - 1]
        mu = mu1 if abs(mu1 - corner) <= abs(mu2 - corner) else mu2
        if stuck % 25 == 0:
            # exceptional shift to break symmetric stagnation
            mu = corner + 1.5 * abs(h[hi - 1, hi - 2])
        # explicit shifted QR restricted to the decoupled window [lo, hi)
        idx = np.arange(lo, hi)
        h[idx, idx] -= mu
        rots = []
        for i in range(lo, hi - 1):
            aa = h[i, i]
            bb = h[i + 1, i]
            rr = math.hypot(abs(aa), abs(bb))
            if rr == 0.0:
                g = np.eye(2, dtype=complex)
            else:
                g = np.array(
                    [[np.conj(aa) / rr, np.conj(bb) / rr], [-bb / rr, aa / rr]],
                    dtype=complex,
                )
            h[i : i + 2, i:hi] = g @ h[i : i + 2, i:hi]
            rots.append((i, g))
        for i, g in rots:
            h[lo:hi, i : i + 2] = h[lo:hi, i : i + 2] @ g.conj().T
        h[idx, idx] += mu
    return np.array(evs, dtype=complex)


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    if a.size == 0:
        return 0.0
    if is_symmetric(a):
        w = symmetric_spectrum(a)
        return float(np.max(np.abs(w)))
    return float(np.max(np.abs(eigenvalues(a))))


# ---------------------------------------------------------------------------
# Derived operations
# ---------------------------------------------------------------------------


def condition_number(m) -> float:
    """Ratio of extreme singular values of a square invertible matrix.

    Symmetric inputs use |eigenvalues| directly; general inputs go through
    the spectrum of M^T M.  Reliable up to kappa ~ 1e7 in float64, which
    covers the experiment rejection threshold.
    """
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError("condition number needs a square matrix")
    if is_symmetric(a):
        sv = np.abs(symmetric_spectrum(a))
    else:
        w = symmetric_spectrum(a.T @ a)
        sv = np.sqrt(np.clip(w, 0.0, None))
    smax = float(np.max(sv))
    smin = float(np.min(sv))
    if smax == 0.0 or smin <= 1e-12 * smax:
        raise Singular("smallest singular value below 1e-12 of the largest")
    return smax / smin


def orthonormal_rowspace_basis(a_block) -> np.ndarray:
    """n x p matrix whose orthonormal columns span the row space of the
    p x n block.  Raises RankDeficient when the rows are dependent."""
    a = _as_matrix(a_block)
    q, _ = qr_decompose(a.T)
    return q


def nullspace_projector(a_block) -> np.ndarray:
    """Orthogonal projector onto the nullspace of a full-row-rank block:
    I - B (B B^T)^{-1} B, computed as I - V V^T from an orthonormal
    rowspace basis V."""
    v = orthonormal_rowspace_basis(a_block)
    p = np.eye(v.shape[0]) - v @ v.T
    return 0.5 * (p + p.T)
