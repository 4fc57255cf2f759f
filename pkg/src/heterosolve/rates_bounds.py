"""Closed-form optimal convergence rates for the six methods and the
condition-number / rate bounds driven by angular heterogeneity.

Rates follow the published closed forms:

    rho_apc = 1 - 2/(sqrt(kappa(S)) + 1)      rho_hbm = 1 - 2/(sqrt(kappa(A^T A)) + 1)
    rho_bcm = 1 - 2/(kappa(S) + 1)            rho_nag = 1 - 2/sqrt(3 kappa(A^T A) + 1)
    rho_mlm = 1 - lambda_min(S)/m             rho_dgd = 1 - 2/kappa(A^T A)

rho_dgd is clamped below at 0: the closed form goes negative for kappa < 2
and has no meaning as a linear rate there.  All angles are radians.

Note on orderings: rho_apc <= rho_bcm <= rho_mlm holds for every admissible
(kappa(S), lambda_min(S), m).  rho_hbm <= rho_nag <= rho_dgd holds for
kappa(A^T A) >= (3 + sqrt(13))/2 ~ 3.3028; below that the stated dgd form
dips under the nag form (e.g. kappa = 3), so ordering checks apply from
KAPPA_ORDERING_MIN up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numkernel
from .errors import BadKappa, BadLambda, DegenerateAngle, UndefinedPhi, ZeroRow
from .heterogeneity import HeterogeneityReport
from .system import LinearSystem, MachineData, build_S

HALF_PI = math.pi / 2.0
_ANGLE_SLACK = 1e-12

# smallest kappa(A^T A) at which 1 - 2/sqrt(3k+1) <= 1 - 2/k
KAPPA_ORDERING_MIN = (3.0 + math.sqrt(13.0)) / 2.0


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < 1.0 - 1e-9:
        raise BadKappa(f"condition number must be >= 1, got {kappa}")
    return max(kappa, 1.0)


def _check_angle(theta: float, name: str = "theta") -> float:
    theta = float(theta)
    if not math.isfinite(theta) or theta < -_ANGLE_SLACK or theta > HALF_PI + _ANGLE_SLACK:
        raise ValueError(f"{name} must lie in [0, pi/2], got {theta}")
    return min(max(theta, 0.0), HALF_PI)


def rate_apc(kappa_s: float) -> float:
    return 1.0 - 2.0 / (math.sqrt(_check_kappa(kappa_s)) + 1.0)


def rate_bcm(kappa_s: float) -> float:
    return 1.0 - 2.0 / (_check_kappa(kappa_s) + 1.0)


def rate_mlm(lambda_min_s: float, m: int) -> float:
    lam = float(lambda_min_s)
    if not math.isfinite(lam) or lam <= 0.0 or lam > m * (1.0 + 1e-9):
        raise BadLambda(f"lambda_min(S) must lie in (0, m], got {lam}")
    return 1.0 - min(lam, float(m)) / m


def rate_hbm(kappa_ata: float) -> float:
    return 1.0 - 2.0 / (math.sqrt(_check_kappa(kappa_ata)) + 1.0)


def rate_nag(kappa_ata: float) -> float:
    return 1.0 - 2.0 / math.sqrt(3.0 * _check_kappa(kappa_ata) + 1.0)


def rate_dgd(kappa_ata: float) -> float:
    return max(0.0, 1.0 - 2.0 / _check_kappa(kappa_ata))


# ---------------------------------------------------------------------------
# Condition-number bounds from angular heterogeneity
# ---------------------------------------------------------------------------


def kappa_s_upper_bound(m: int, theta_h: float) -> float | None:
    """(1 + (m-1)cos th)/(1 - (m-1)cos th) when (m-1)cos th < 1, else None
    (bound not applicable)."""
    if m < 2:
        raise ValueError("upper bound needs m >= 2")
    x = (m - 1) * math.cos(_check_angle(theta_h, "theta_h"))
    if x >= 1.0:
        return None
    return (1.0 + x) / (1.0 - x)


def kappa_s_lower_bound(theta_h: float) -> float:
    """1 / sin^2(theta_h); infinite (DegenerateAngle) at theta_h = 0."""
    theta = _check_angle(theta_h, "theta_h")
    if theta <= 0.0:
        raise DegenerateAngle("theta_h = 0 makes the lower bound infinite")
    return 1.0 / math.sin(theta) ** 2


def kappa_lower_bound_from_rows(a: np.ndarray, theta_min_row) -> float:
    """max_k ||a_k|| / min_l { ||a_l|| sin(theta_min_l) }: a lower bound on
    kappa(A) from row norms and per-row minimal angles."""
    a = np.asarray(a, dtype=float)
    norms = np.sqrt(np.sum(a * a, axis=1))
    if np.any(norms < 1e-14):
        raise ZeroRow("zero row in coefficient matrix")
    angles = np.asarray(theta_min_row, dtype=float)
    if angles.shape != (a.shape[0],):
        raise ValueError("one angle per row required")
    sines = np.sin(np.clip(angles, 0.0, HALF_PI))
    if np.any(sines == 0.0):
        raise DegenerateAngle("duplicate row direction makes the bound infinite")
    return float(np.max(norms) / np.min(norms * sines))


@dataclass(frozen=True)
class RateBoundTable:
    """Lower/upper bounds on each optimal rate from the angular metrics.

    The APC upper bound needs (m-1)cos^2(theta_h) <= 1 and is None when
    violated; phi-based entries are None when phi_min is undefined; all
    theta entries are None when theta_h is undefined (m = 1).
    """

    mlm_lower: float | None
    mlm_upper: float | None
    bcm_lower: float | None
    bcm_upper: float | None
    apc_lower: float | None
    apc_upper: float | None
    dgd_lower_norms: float
    dgd_lower_phi: float | None
    nag_lower_norms: float
    nag_lower_phi: float | None
    hbm_lower_norms: float
    hbm_lower_phi: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def rate_bound_table(
    m: int, theta_h: float | None, phi_min: float | None, row_norms
) -> RateBoundTable:
    norms = np.asarray(row_norms, dtype=float)
    if norms.size == 0 or np.any(norms <= 0.0):
        raise ZeroRow("row norms must be positive")
    hi = float(np.max(norms))
    lo = float(np.min(norms))
    ratio = hi / lo

    mlm_lower = mlm_upper = bcm_lower = bcm_upper = apc_lower = apc_upper = None
    if theta_h is not None:
        th = _check_angle(theta_h, "theta_h")
        c, s = math.cos(th), math.sin(th)
        mlm_lower = 1.0 - s * s
        mlm_upper = (1.0 - 1.0 / m) * (1.0 + c)
        bcm_lower = 2.0 / (1.0 + s * s) - 1.0
        bcm_upper = (m - 1) * c
        apc_lower = 2.0 / (1.0 + s) - 1.0
        if (m - 1) * c * c <= 1.0:
            apc_upper = (m - 1) * c / (1.0 + math.sqrt(1.0 - (m - 1) * c * c))

    dgd_lower_phi = nag_lower_phi = hbm_lower_phi = None
    if phi_min is not None:
        ph = _check_angle(phi_min, "phi_min")
        sp = math.sin(ph)
        dgd_lower_phi = 2.0 / (1.0 + sp * sp) - 1.0
        nag_lower_phi = 1.0 - 2.0 * sp / math.sqrt(3.0 + sp * sp)
        hbm_lower_phi = 2.0 / (1.0 + sp) - 1.0

    return RateBoundTable(
        mlm_lower=mlm_lower,
        mlm_upper=mlm_upper,
        bcm_lower=bcm_lower,
        bcm_upper=bcm_upper,
        apc_lower=apc_lower,
        apc_upper=apc_upper,
        dgd_lower_norms=(hi * hi - lo * lo) / (hi * hi + lo * lo),
        dgd_lower_phi=dgd_lower_phi,
        nag_lower_norms=1.0 - 2.0 / math.sqrt(3.0 * ratio + 1.0),
        nag_lower_phi=nag_lower_phi,
        hbm_lower_norms=(hi - lo) / (hi + lo),
        hbm_lower_phi=hbm_lower_phi,
    )


def apc_vs_hbm_sufficient(m: int, theta_h: float, phi_min: float | None) -> bool:
    """True when (m-1)cos(theta_h) <= cos^2(phi_min): a sufficient
    condition for the consensus method to beat heavy ball."""
    if phi_min is None:
        raise UndefinedPhi("phi_min undefined: every machine holds one equation")
    th = _check_angle(theta_h, "theta_h")
    ph = _check_angle(phi_min, "phi_min")
    return (m - 1) * math.cos(th) <= math.cos(ph) ** 2


# ---------------------------------------------------------------------------
# Aggregated reports
# ---------------------------------------------------------------------------

RATE_CSV_COLUMNS = (
    "kappa_s",
    "kappa_ata",
    "lambda_min_s",
    "rho_apc",
    "rho_bcm",
    "rho_mlm",
    "rho_hbm",
    "rho_nag",
    "rho_dgd",
)


@dataclass(frozen=True)
class RateReport:
    """Closed-form optimal rates for all six methods on one instance."""

    kappa_s: float
    kappa_ata: float
    lambda_min_s: float
    m: int
    rho_apc: float
    rho_bcm: float
    rho_mlm: float
    rho_hbm: float
    rho_nag: float
    rho_dgd: float

    def to_dict(self) -> dict:
        return {
            "kappa_s": self.kappa_s,
            "kappa_ata": self.kappa_ata,
            "lambda_min_s": self.lambda_min_s,
            "m": self.m,
            "rho_apc": self.rho_apc,
            "rho_bcm": self.rho_bcm,
            "rho_mlm": self.rho_mlm,
            "rho_hbm": self.rho_hbm,
            "rho_nag": self.rho_nag,
            "rho_dgd": self.rho_dgd,
        }

    def csv_row(self) -> tuple:
        return (
            self.kappa_s,
            self.kappa_ata,
            self.lambda_min_s,
            self.rho_apc,
            self.rho_bcm,
            self.rho_mlm,
            self.rho_hbm,
            self.rho_nag,
            self.rho_dgd,
        )


def rate_report_from_spectra(s_spectrum, ata_spectrum, m: int) -> RateReport:
    s = np.asarray(s_spectrum, dtype=float)
    ata = np.asarray(ata_spectrum, dtype=float)
    lam_min_s = float(s[-1])
    if lam_min_s <= 0.0:
        raise BadLambda("S is singular: lambda_min(S) <= 0")
    if float(ata[-1]) <= 0.0:
        raise BadKappa("A^T A is singular")
    kappa_s = float(s[0]) / lam_min_s
    kappa_ata = float(ata[0]) / float(ata[-1])
    return RateReport(
        kappa_s=kappa_s,
        kappa_ata=kappa_ata,
        lambda_min_s=lam_min_s,
        m=m,
        rho_apc=rate_apc(kappa_s),
        rho_bcm=rate_bcm(kappa_s),
        rho_mlm=rate_mlm(lam_min_s, m),
        rho_hbm=rate_hbm(kappa_ata),
        rho_nag=rate_nag(kappa_ata),
        rho_dgd=rate_dgd(kappa_ata),
    )


def rate_report_for(sys: LinearSystem, machines: list[MachineData]) -> RateReport:
    s_spec = numkernel.symmetric_spectrum(build_S(machines))
    ata_spec = numkernel.symmetric_spectrum(sys.a.T @ sys.a)
    return rate_report_from_spectra(s_spec, ata_spec, len(machines))


BOUND_CSV_COLUMNS = (
    "kappa_s_lower",
    "kappa_s_upper",
    "kappa_a_row_bound",
    "mlm_lower",
    "mlm_upper",
    "bcm_lower",
    "bcm_upper",
    "apc_lower",
    "apc_upper",
    "dgd_lower_norms",
    "dgd_lower_phi",
    "nag_lower_norms",
    "nag_lower_phi",
    "hbm_lower_norms",
    "hbm_lower_phi",
    "apc_vs_hbm_sufficient",
)


@dataclass(frozen=True)
class BoundReport:
    """Every bound computable from one heterogeneity report.

    kappa_s_lower is +inf at theta_h = 0; kappa_s_upper is None when the
    (m-1)cos(theta_h) < 1 precondition fails; the sufficiency flag is None
    when phi_min is undefined.
    """

    kappa_s_lower: float | None
    kappa_s_upper: float | None
    kappa_a_row_bound: float
    table: RateBoundTable
    apc_vs_hbm_sufficient: bool | None

    def to_dict(self) -> dict:
        return {
            "kappa_s_lower": self.kappa_s_lower,
            "kappa_s_upper": self.kappa_s_upper,
            "kappa_a_row_bound": self.kappa_a_row_bound,
            "table": self.table.to_dict(),
            "apc_vs_hbm_sufficient": self.apc_vs_hbm_sufficient,
        }

    def csv_row(self) -> tuple:
        t = self.table
        return (
            self.kappa_s_lower,
            self.kappa_s_upper,
            self.kappa_a_row_bound,
            t.mlm_lower,
            t.mlm_upper,
            t.bcm_lower,
            t.bcm_upper,
            t.apc_lower,
            t.apc_upper,
            t.dgd_lower_norms,
            t.dgd_lower_phi,
            t.nag_lower_norms,
            t.nag_lower_phi,
            t.hbm_lower_norms,
            t.hbm_lower_phi,
            self.apc_vs_hbm_sufficient,
        )


def bound_report_for(
    machines: list[MachineData], het: HeterogeneityReport
) -> BoundReport:
    a = np.vstack([mach.a_block for mach in machines])
    norms = np.sqrt(np.sum(a * a, axis=1))
    m = len(machines)

    lower = upper = None
    if het.theta_h is not None:
        try:
            lower = kappa_s_lower_bound(het.theta_h)
        except DegenerateAngle:
            lower = math.inf
        upper = kappa_s_upper_bound(m, het.theta_h)

    sufficient = None
    if het.theta_h is not None and het.phi_min is not None:
        sufficient = apc_vs_hbm_sufficient(m, het.theta_h, het.phi_min)

    return BoundReport(
        kappa_s_lower=lower,
        kappa_s_upper=upper,
        kappa_a_row_bound=kappa_lower_bound_from_rows(a, het.theta_min_row),
        table=rate_bound_table(m, het.theta_h, het.phi_min, norms),
        apc_vs_hbm_sufficient=sufficient,
    )
