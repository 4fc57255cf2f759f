"""Iteration kernels for the six distributed solvers, hyperparameter
tuning, and a run-to-tolerance engine with empirical rate estimation.

The taskmaster/worker message pattern is simulated: per round, projection
methods (APC, MLM, BCM) broadcast the shared estimate and gather machine
updates (2m directed messages); gradient methods gather the m per-machine
gradients (m messages).

Error dynamics are linear for every kernel, so a long run's log-error tail
is fitted by least squares to estimate the realized contraction factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkernel
from .errors import (
    BadSpectrum,
    Diverged,
    InvalidConfig,
    NoConvergentParams,
    Stalled,
)
from .serialize import dump_json, write_csv
from .system import LinearSystem, MachineData, build_S

METHODS = ("APC", "DHBM", "DGD", "DNAG", "BCM", "MLM")

DIVERGENCE_THRESHOLD = 1e6
ERROR_FLOOR = 100.0 * np.finfo(float).eps


# ---------------------------------------------------------------------------
# Configuration and trace records
# ---------------------------------------------------------------------------


@dataclass
class SolverConfig:
    """Method choice plus hyperparameters; None means auto-tune.

    Explicit APC momenta must satisfy gamma >= 1 and eta > 1; tuning may
    return the degenerate eta = 1 limit on one-step instances.
    """

    method: str
    gamma: float | None = None
    eta: float | None = None
    alpha: float | None = None
    beta: float | None = None
    mu: float | None = None
    max_iters: int = 20000
    tol: float = 1e-10
    record_trace: bool = True

    def __post_init__(self):
        self.method = str(self.method).upper()
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}")
        if self.max_iters < 1:
            raise InvalidConfig("max_iters must be >= 1")
        if not (0.0 < self.tol < 1.0):
            raise InvalidConfig("tol must lie in (0, 1)")
        if self.method == "APC":
            if (self.gamma is None) != (self.eta is None):
                raise InvalidConfig("APC needs both gamma and eta (or neither)")
            if self.gamma is not None and self.gamma < 1.0:
                raise InvalidConfig("APC momentum gamma must be >= 1")
            if self.eta is not None and self.eta <= 1.0:
                raise InvalidConfig("APC momentum eta must be > 1")
        if self.method in ("DHBM", "DNAG"):
            if (self.alpha is None) != (self.beta is None):
                raise InvalidConfig(f"{self.method} needs both alpha and beta (or neither)")


@dataclass
class IterationTrace:
    """Per-iteration relative errors plus the fitted tail decay rate."""

    method: str
    errors: np.ndarray
    rounds: int
    messages_per_round: int
    fitted_rate: float
    fit_window: tuple[int, int]
    converged: bool
    params: dict
    tol: float

    def to_sidecar_dict(self, extra: dict | None = None) -> dict:
        doc = {
            "method": self.method,
            "rounds": self.rounds,
            "messages_per_round": self.messages_per_round,
            "fitted_rate": self.fitted_rate,
            "fit_window": list(self.fit_window),
            "converged": self.converged,
            "params": self.params,
            "tol": self.tol,
            "final_error": float(self.errors[-1]) if len(self.errors) else None,
        }
        if extra:
            doc.update(extra)
        return doc


def write_trace_csv(trace: IterationTrace, path) -> None:
    write_csv(path, ("iter", "error"), enumerate(trace.errors.tolist()))


def write_trace_sidecar(trace: IterationTrace, path, extra: dict | None = None) -> None:
    dump_json(path, trace.to_sidecar_dict(extra))


# ---------------------------------------------------------------------------
# Per-method states
# ---------------------------------------------------------------------------


@dataclass
class ApcState:
    x_machines: np.ndarray  # shape (m, n); A_i x_i = b_i throughout
    x_bar: np.ndarray


@dataclass
class MlmState:
    x_machines: np.ndarray


@dataclass
class HeavyBallState:
    x: np.ndarray
    z: np.ndarray


@dataclass
class GradientState:
    x: np.ndarray


@dataclass
class NagState:
    x: np.ndarray
    x_prev: np.ndarray


@dataclass
class BcmState:
    x: np.ndarray


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def apc_init(machines: list[MachineData]) -> ApcState:
    """Minimum-norm local solutions and their mean: x_i(0) = A_i^+ b_i."""
    x_loc = np.stack([mach.pinv @ mach.b_block for mach in machines])
    return ApcState(x_machines=x_loc, x_bar=x_loc.mean(axis=0))


def apc_step(
    state: ApcState, machines: list[MachineData], gamma: float, eta: float
) -> ApcState:
    """One consensus round: every machine steps inside its local solution
    space using the shared estimate, then the server averages with memory."""
    xs, xb = state.x_machines, state.x_bar
    new = np.empty_like(xs)
    for i, mach in enumerate(machines):
        new[i] = xs[i] + gamma * mach.project_nullspace(xb - xs[i])
    xb_new = (eta / len(machines)) * new.sum(axis=0) + (1.0 - eta) * xb
    return ApcState(x_machines=new, x_bar=xb_new)


def mlm_init(machines: list[MachineData]) -> MlmState:
    return MlmState(x_machines=apc_init(machines).x_machines)


def mlm_step(state: MlmState, machines: list[MachineData]) -> MlmState:
    """Projection consensus against the network mean (complete graph)."""
    xs = state.x_machines
    u = xs.mean(axis=0)
    new = np.empty_like(xs)
    for i, mach in enumerate(machines):
        new[i] = xs[i] + mach.project_nullspace(u - xs[i])
    return MlmState(x_machines=new)


def _stacked_gradient(machines: list[MachineData], x: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(x)
    for mach in machines:
        grad += mach.a_block.T @ (mach.a_block @ x - mach.b_block)
    return grad


def dhbm_step(
    state: HeavyBallState, machines: list[MachineData], alpha: float, beta: float
) -> HeavyBallState:
    z = beta * state.z + _stacked_gradient(machines, state.x)
    return HeavyBallState(x=state.x - alpha * z, z=z)


def dgd_step(
    state: GradientState, machines: list[MachineData], alpha: float
) -> GradientState:
    return GradientState(x=state.x - alpha * _stacked_gradient(machines, state.x))


def dnag_step(
    state: NagState, machines: list[MachineData], alpha: float, beta: float
) -> NagState:
    y = state.x + beta * (state.x - state.x_prev)
    return NagState(x=y - alpha * _stacked_gradient(machines, y), x_prev=state.x)


def bcm_step(state: BcmState, machines: list[MachineData], mu: float) -> BcmState:
    """Relaxed sum of row-block projections: x + mu * sum_i A_i^+ (b_i - A_i x),
    equivalently x + mu S (x* - x)."""
    delta = np.zeros_like(state.x)
    for mach in machines:
        delta += mach.pinv @ (mach.b_block - mach.a_block @ state.x)
    return BcmState(x=state.x + mu * delta)


# ---------------------------------------------------------------------------
# Hyperparameter tuning
# ---------------------------------------------------------------------------


def apc_iteration_radius(s_spectrum, m: int, gamma: float, eta: float) -> float:
    """Spectral radius of the consensus error iteration for given momenta.

    The (machine-mean, server) error pair decouples over the spectrum of
    S/m into 2x2 blocks with trace (1-gamma)+(1-eta)+eta*gamma*(1-lam/m)
    and determinant (1-gamma)(1-eta); the remaining modes contract by
    |1-gamma|.
    """
    lam = np.asarray(s_spectrum, dtype=float) / m
    tr = (1.0 - gamma) + (1.0 - eta) + eta * gamma * (1.0 - lam)
    det = (1.0 - gamma) * (1.0 - eta)
    disc = tr * tr - 4.0 * det
    real = (np.abs(tr) + np.sqrt(np.maximum(disc, 0.0))) / 2.0
    cplx = np.sqrt(max(det, 0.0))
    radius = float(np.max(np.where(disc >= 0.0, real, cplx)))
    return max(radius, abs(1.0 - gamma))


def tune_apc(s_spectrum, m: int) -> tuple[float, float]:
    """Momenta (gamma, eta) minimizing the consensus iteration radius.

    Closed-form seed: the decoupled blocks are a heavy-ball iteration in
    (alpha, beta) = (gamma*eta, (gamma-1)(eta-1)) on the spectrum of S/m,
    so the optimal pair comes from splitting the heavy-ball optimum into
    the two momenta; a small grid refinement then guards the seed.
    """
    lam = np.asarray(s_spectrum, dtype=float)
    lam_min, lam_max = float(lam[-1]), float(lam[0])
    if lam_min <= 0.0:
        raise BadSpectrum("S has a non-positive eigenvalue")
    mu_min, mu_max = lam_min / m, lam_max / m
    alpha = 4.0 / (math.sqrt(mu_max) + math.sqrt(mu_min)) ** 2
    kappa = mu_max / mu_min
    rho_star = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
    beta = rho_star * rho_star
    ssum = alpha + 1.0 - beta
    disc = max(ssum * ssum - 4.0 * alpha, 0.0)
    root = math.sqrt(disc)
    gamma = max((ssum - root) / 2.0, 1.0)
    eta = max((ssum + root) / 2.0, 1.0)

    best = (apc_iteration_radius(lam, m, gamma, eta), gamma, eta)
    # multiplicative refinement on the momentum offsets
    for dg in (-0.02, -0.005, 0.0, 0.005, 0.02):
        for de in (-0.02, -0.005, 0.0, 0.005, 0.02):
            g = 1.0 + (gamma - 1.0) * (1.0 + dg)
            e = 1.0 + (eta - 1.0) * (1.0 + de)
            r = apc_iteration_radius(lam, m, g, e)
            if r < best[0]:
                best = (r, g, e)
    radius, gamma, eta = best
    if radius >= 1.0:
        raise NoConvergentParams(f"no contraction found: radius {radius:.6f}")
    return gamma, eta


def gradient_iteration_radius(ata_spectrum, method: str, params: dict) -> float:
    """Spectral radius of the centralized gradient-method error iteration
    over the spectrum of A^T A."""
    lam = np.asarray(ata_spectrum, dtype=float)
    method = method.upper()
    if method == "DGD":
        return float(np.max(np.abs(1.0 - params["alpha"] * lam)))
    if method == "DHBM":
        tr = 1.0 + params["beta"] - params["alpha"] * lam
        det = params["beta"]
    elif method == "DNAG":
        tr = (1.0 + params["beta"]) * (1.0 - params["alpha"] * lam)
        det = params["beta"] * (1.0 - params["alpha"] * lam)
    else:
        raise InvalidConfig(f"not a gradient method: {method}")
    disc = tr * tr - 4.0 * det
    real = (np.abs(tr) + np.sqrt(np.maximum(disc, 0.0))) / 2.0
    cplx = np.sqrt(np.maximum(det, 0.0))
    return float(np.max(np.where(disc >= 0.0, real, cplx)))


def tune_gradient_methods(ata_spectrum, method: str) -> dict:
    """Step size / momentum for DHBM, DGD, or DNAG from the spectrum of
    A^T A (classical quadratic tunings)."""
    lam = np.asarray(ata_spectrum, dtype=float)
    lam_min, lam_max = float(lam[-1]), float(lam[0])
    if lam_min <= 0.0:
        raise BadSpectrum("A^T A has a non-positive eigenvalue")
    kappa = lam_max / lam_min
    method = method.upper()
    if method == "DHBM":
        sk = math.sqrt(kappa)
        return {
            "alpha": 4.0 / (math.sqrt(lam_max) + math.sqrt(lam_min)) ** 2,
            "beta": ((sk - 1.0) / (sk + 1.0)) ** 2,
        }
    if method == "DGD":
        return {"alpha": 2.0 / (lam_max + lam_min)}
    if method == "DNAG":
        root = math.sqrt(3.0 * kappa + 1.0)
        params = {
            "alpha": 4.0 / (3.0 * lam_max + lam_min),
            "beta": (root - 2.0) / (root + 2.0),
        }
        target = 1.0 - 2.0 / root
        if gradient_iteration_radius(lam, "DNAG", params) > target + 1e-3:
            # grid fallback in case the closed form misses on an odd spectrum
            best = (math.inf, params)
            for fa in np.linspace(0.5, 1.5, 21):
                for fb in np.linspace(0.8, 1.2, 21):
                    cand = {"alpha": params["alpha"] * fa, "beta": min(params["beta"] * fb, 0.999)}
                    r = gradient_iteration_radius(lam, "DNAG", cand)
                    if r < best[0]:
                        best = (r, cand)
            params = best[1]
        return params
    raise InvalidConfig(f"not a gradient method: {method}")


def tune_bcm(s_spectrum) -> float:
    """Relaxation mu = 2/(lambda_min(S) + lambda_max(S))."""
    lam = np.asarray(s_spectrum, dtype=float)
    if float(lam[-1]) <= 0.0:
        raise BadSpectrum("S has a non-positive eigenvalue")
    return 2.0 / (float(lam[0]) + float(lam[-1]))


# ---------------------------------------------------------------------------
# Linearized consensus operator
# ---------------------------------------------------------------------------


def build_apc_operator(
    machines: list[MachineData], gamma: float, eta: float
) -> np.ndarray:
    """Matrix of one consensus round on the stacked error state
    [x_1 - x*, ..., x_m - x*, x_bar - x*], dimension n(m+1).

    Machine error components are projected onto their local nullspaces
    (where the algorithm keeps them: A_i x_i = b_i from initialization on),
    which removes the unit eigenvalue the raw affine map carries on the
    never-excited transverse directions.  On solver-consistent states the
    product equals apc_step exactly.
    """
    m = len(machines)
    n = machines[0].basis.shape[0]
    s = build_S(machines)
    op = np.zeros((n * (m + 1), n * (m + 1)))
    for i, mach in enumerate(machines):
        proj = mach.nullspace_proj
        rows = slice(i * n, (i + 1) * n)
        op[rows, rows] = (1.0 - gamma) * proj
        op[rows, m * n :] = gamma * proj
        op[m * n :, rows] = (eta / m) * (1.0 - gamma) * proj
    op[m * n :, m * n :] = (eta * gamma / m) * (m * np.eye(n) - s) + (
        1.0 - eta
    ) * np.eye(n)
    return op


# ---------------------------------------------------------------------------
# Run engine
# ---------------------------------------------------------------------------


def fit_rate(errors) -> tuple[float, tuple[int, int]]:
    """Least-squares slope of log e_t over the last half of the trajectory,
    discarding entries below 100 * machine epsilon.  Returns 0.0 with an
    empty window when fewer than two usable points exist (instant
    convergence)."""
    e = np.asarray(errors, dtype=float)
    idx = np.nonzero(e >= ERROR_FLOOR)[0]
    if idx.size < 2:
        return 0.0, (0, 0)
    window = idx[idx.size // 2 :]
    if window.size < 2:
        window = idx[-2:]
    slope = np.polyfit(window.astype(float), np.log(e[window]), 1)[0]
    return float(np.exp(slope)), (int(window[0]), int(window[-1]) + 1)


def _resolve_params(
    config: SolverConfig, sys: LinearSystem, machines: list[MachineData]
) -> dict:
    method = config.method
    if method == "APC":
        if config.gamma is not None:
            return {"gamma": config.gamma, "eta": config.eta}
        spec = numkernel.symmetric_spectrum(build_S(machines))
        gamma, eta = tune_apc(spec, len(machines))
        return {"gamma": gamma, "eta": eta}
    if method == "BCM":
        if config.mu is not None:
            return {"mu": config.mu}
        spec = numkernel.symmetric_spectrum(build_S(machines))
        return {"mu": tune_bcm(spec)}
    if method == "MLM":
        return {}
    # gradient methods
    if method == "DGD" and config.alpha is not None:
        return {"alpha": config.alpha}
    if method in ("DHBM", "DNAG") and config.alpha is not None:
        return {"alpha": config.alpha, "beta": config.beta}
    spec = numkernel.symmetric_spectrum(sys.a.T @ sys.a)
    return tune_gradient_methods(spec, method)


def run(
    sys: LinearSystem, machines: list[MachineData], config: SolverConfig
) -> IterationTrace:
    """Iterate the configured method until the relative error reaches tol.

    Raises Diverged / Stalled with the partial trace attached when the
    error blows past 1e6 or the iteration budget runs out.
    """
    method = config.method
    m = len(machines)
    n = sys.n
    params = _resolve_params(config, sys, machines)
    x_star = sys.x_star
    denom = float(np.sqrt(np.sum(x_star * x_star)))
    if denom == 0.0:
        denom = 1.0

    if method == "APC":
        state = apc_init(machines)
        step = lambda s: apc_step(s, machines, params["gamma"], params["eta"])
        estimate = lambda s: s.x_bar
        messages = 2 * m
    elif method == "MLM":
        state = mlm_init(machines)
        step = lambda s: mlm_step(s, machines)
        estimate = lambda s: s.x_machines.mean(axis=0)
        messages = 2 * m
    elif method == "BCM":
        state = BcmState(x=np.zeros(n))
        step = lambda s: bcm_step(s, machines, params["mu"])
        estimate = lambda s: s.x
        messages = 2 * m
    elif method == "DHBM":
        state = HeavyBallState(x=np.zeros(n), z=np.zeros(n))
        step = lambda s: dhbm_step(s, machines, params["alpha"], params["beta"])
        estimate = lambda s: s.x
        messages = m
    elif method == "DNAG":
        state = NagState(x=np.zeros(n), x_prev=np.zeros(n))
        step = lambda s: dnag_step(s, machines, params["alpha"], params["beta"])
        estimate = lambda s: s.x
        messages = m
    else:  # DGD
        state = GradientState(x=np.zeros(n))
        step = lambda s: dgd_step(s, machines, params["alpha"])
        estimate = lambda s: s.x
        messages = m

    def rel_err(s) -> float:
        d = estimate(s) - x_star
        return float(np.sqrt(np.sum(d * d))) / denom

    errors = [rel_err(state)]
    converged = errors[0] <= config.tol
    rounds = 0

    def make_trace(conv: bool) -> IterationTrace:
        arr = np.asarray(errors, dtype=float)
        fitted, window = fit_rate(arr)
        return IterationTrace(
            method=method,
            errors=arr if config.record_trace else arr[[0, -1]],
            rounds=rounds,
            messages_per_round=messages,
            fitted_rate=fitted,
            fit_window=window,
            converged=conv,
            params=params,
            tol=config.tol,
        )

    while not converged and rounds < config.max_iters:
        state = step(state)
        rounds += 1
        e = rel_err(state)
        errors.append(e)
        if not math.isfinite(e) or e > DIVERGENCE_THRESHOLD:
            raise Diverged(
                f"{method}: relative error {e:.3e} at round {rounds}",
                trace=make_trace(False),
            )
        if e <= config.tol:
            converged = True

    if not converged:
        raise Stalled(
            f"{method}: error {errors[-1]:.3e} > tol after {rounds} rounds",
            trace=make_trace(False),
        )
    return make_trace(True)
