import math

import numpy as np
import pytest

from heterosolve import heterogeneity as het
from heterosolve import numkernel, rates_bounds as rb, system
from heterosolve.errors import (
    BadKappa,
    BadLambda,
    DegenerateAngle,
    UndefinedPhi,
    ZeroRow,
)

SQRT2 = math.sqrt(2.0)
KAPPA_WORKED = 3.0 + 2.0 * SQRT2  # kappa(S) of the tight 2x2 instance


def test_rate_apc_values():
    assert rb.rate_apc(1.0) == 0.0
    assert abs(rb.rate_apc(9.0) - 0.5) < 1e-15
    assert abs(rb.rate_apc(KAPPA_WORKED) - (SQRT2 - 1.0)) < 1e-12
    with pytest.raises(BadKappa):
        rb.rate_apc(0.5)


def test_rate_bcm_mlm_values():
    assert rb.rate_bcm(1.0) == 0.0
    for m in (2, 5, 12):
        assert abs(rb.rate_mlm(1.0, m) - (1.0 - 1.0 / m)) < 1e-15
    with pytest.raises(BadLambda):
        rb.rate_mlm(0.0, 4)
    with pytest.raises(BadLambda):
        rb.rate_mlm(4.5, 4)


def test_rate_gradient_values():
    assert rb.rate_hbm(1.0) == 0.0
    assert rb.rate_dgd(1.0) == 0.0  # clamped from -1
    assert rb.rate_dgd(1.5) == 0.0
    a1 = 50.0
    assert abs(rb.rate_hbm(a1 * a1) - (1.0 - 2.0 / (a1 + 1.0))) < 1e-12
    assert abs(rb.rate_nag(1.0)) < 1e-15


def test_rate_monotonicity():
    grid = np.linspace(1.0, 500.0, 200)
    for f in (rb.rate_apc, rb.rate_bcm, rb.rate_hbm, rb.rate_nag):
        vals = [f(k) for k in grid]
        assert np.all(np.diff(vals) > 0.0)


def test_rate_orderings_projection():
    # rho_apc <= rho_bcm <= rho_mlm for spectra coupled through one S
    rng = np.random.default_rng(3)
    for _ in range(200):
        m = int(rng.integers(2, 12))
        n = int(rng.integers(m, 40))
        lam = np.sort(rng.uniform(1e-3, m, size=n))[::-1]
        kappa_s = lam[0] / lam[-1]
        assert rb.rate_apc(kappa_s) <= rb.rate_bcm(kappa_s) + 1e-15
        assert rb.rate_bcm(kappa_s) <= rb.rate_mlm(lam[-1], m) + 1e-12


def test_rate_orderings_gradient():
    # hbm <= nag always; nag <= dgd from the documented threshold up
    for kappa in np.linspace(1.0, 800.0, 300):
        assert rb.rate_hbm(kappa) <= rb.rate_nag(kappa) + 1e-15
    for kappa in np.linspace(rb.KAPPA_ORDERING_MIN, 800.0, 300):
        assert rb.rate_nag(kappa) <= rb.rate_dgd(kappa) + 1e-12
    # below the threshold the stated dgd form dips under nag (kappa = 3)
    assert rb.rate_nag(3.0) > rb.rate_dgd(3.0)


def test_kappa_s_upper_bound():
    assert abs(rb.kappa_s_upper_bound(2, math.pi / 3) - 3.0) < 1e-12
    tight = rb.kappa_s_upper_bound(2, math.pi / 4)
    assert abs(tight - KAPPA_WORKED) < 1e-9
    assert rb.kappa_s_upper_bound(3, math.pi / 3) is None  # boundary
    # for m = 2 any theta_h > 0 qualifies
    assert rb.kappa_s_upper_bound(2, 1e-6) is not None


def test_kappa_s_lower_bound():
    assert abs(rb.kappa_s_lower_bound(math.pi / 2) - 1.0) < 1e-15
    assert abs(rb.kappa_s_lower_bound(math.pi / 4) - 2.0) < 1e-12
    assert abs(rb.kappa_s_lower_bound(math.pi / 6) - 4.0) < 1e-12
    with pytest.raises(DegenerateAngle):
        rb.kappa_s_lower_bound(0.0)


def test_kappa_lower_bound_from_rows():
    a = np.diag(np.linspace(50.0, 1.0, 6))
    angles = het.row_min_angles(a)
    assert abs(rb.kappa_lower_bound_from_rows(a, angles) - 50.0) < 1e-9

    eye = np.eye(4)
    assert abs(rb.kappa_lower_bound_from_rows(eye, het.row_min_angles(eye)) - 1.0) < 1e-12

    worked = np.array([[1.0, 0.0], [1.0, 1.0]])
    bound = rb.kappa_lower_bound_from_rows(worked, het.row_min_angles(worked))
    assert abs(bound - 2.0) < 1e-12
    assert bound <= numkernel.condition_number(worked) + 1e-9

    with pytest.raises(DegenerateAngle):
        rb.kappa_lower_bound_from_rows(worked, np.array([0.0, math.pi / 4]))
    with pytest.raises(ZeroRow):
        rb.kappa_lower_bound_from_rows(np.zeros((2, 2)), np.array([0.1, 0.1]))


def test_rate_bound_table_orthogonal_case():
    t = rb.rate_bound_table(3, math.pi / 2, math.pi / 2, np.ones(6))
    assert abs(t.apc_lower) < 1e-15 and abs(t.apc_upper) < 1e-15
    assert abs(t.bcm_lower) < 1e-15 and abs(t.bcm_upper) < 1e-15
    assert t.dgd_lower_norms == 0.0
    assert abs(t.dgd_lower_phi) < 1e-15
    assert abs(t.nag_lower_phi) < 1e-15
    assert abs(t.hbm_lower_phi) < 1e-15
    assert t.hbm_lower_norms == 0.0


def test_rate_bound_table_tight_apc_upper():
    t = rb.rate_bound_table(2, math.pi / 4, None, np.array([1.0, SQRT2]))
    assert abs(t.apc_upper - (SQRT2 / 2) / (1 + math.sqrt(0.5))) < 1e-12
    assert abs(t.apc_upper - 0.414214) < 1e-6
    assert t.dgd_lower_phi is None and t.nag_lower_phi is None and t.hbm_lower_phi is None


def test_rate_bound_table_not_applicable_upper():
    t = rb.rate_bound_table(4, 1e-3, None, np.ones(4))  # (m-1)cos^2 > 1
    assert t.apc_upper is None
    assert t.bcm_upper is not None  # always computable


def test_rate_bound_table_m1_theta_undefined():
    t = rb.rate_bound_table(1, None, math.pi / 3, np.array([1.0, 2.0]))
    assert t.mlm_lower is None and t.apc_upper is None
    assert t.dgd_lower_norms > 0.0
    assert t.hbm_lower_phi is not None


def test_apc_vs_hbm_sufficient():
    assert rb.apc_vs_hbm_sufficient(2, math.pi / 2, 0.3) is True
    assert rb.apc_vs_hbm_sufficient(3, math.pi / 3, math.pi / 2) is False
    assert rb.apc_vs_hbm_sufficient(2, math.pi / 3, math.pi / 4) is True  # 0.5 <= 0.5
    with pytest.raises(UndefinedPhi):
        rb.apc_vs_hbm_sufficient(2, math.pi / 3, None)


def _worked_reports():
    sys_ = system.from_matrix(np.array([[1.0, 0.0], [1.0, 1.0]]), b=np.array([1.0, 2.0]))
    machines = system.build_machines(sys_, system.partition_custom(sys_, [1, 1]))
    hrep = het.compute_report(machines)
    return sys_, machines, hrep


def test_rate_report_for_worked_instance():
    sys_, machines, _ = _worked_reports()
    rep = rb.rate_report_for(sys_, machines)
    assert abs(rep.kappa_s - KAPPA_WORKED) < 1e-9
    assert abs(rep.rho_apc - (SQRT2 - 1.0)) < 1e-9
    assert abs(rep.rho_bcm - SQRT2 / 2) < 1e-9
    assert abs(rep.rho_mlm - (1 + SQRT2 / 2) / 2) < 1e-9
    row = rep.csv_row()
    assert len(row) == len(rb.RATE_CSV_COLUMNS)
    doc = rep.to_dict()
    assert set(doc) >= {"kappa_s", "rho_apc", "rho_dgd"}


def test_bound_report_for_worked_instance():
    _, machines, hrep = _worked_reports()
    rep = rb.bound_report_for(machines, hrep)
    assert abs(rep.kappa_s_lower - 2.0) < 1e-12
    assert abs(rep.kappa_s_upper - KAPPA_WORKED) < 1e-9
    assert abs(rep.kappa_a_row_bound - 2.0) < 1e-12
    assert rep.apc_vs_hbm_sufficient is None  # phi undefined (p_i = 1)
    assert len(rep.csv_row()) == len(rb.BOUND_CSV_COLUMNS)


def test_eq14_eq15_chain_random():
    # kappa(A^T A) >= 1/sin^2(phi_min) and >= (max||a||/min||a||)^2
    rng = np.random.default_rng(21)
    for _ in range(25):
        sys_ = system.draw_gaussian(rng, 16, 0.5, 1.0)
        machines = system.build_machines(sys_, system.partition_even(sys_, 4))
        hrep = het.compute_report(machines)
        spec = numkernel.symmetric_spectrum(sys_.a.T @ sys_.a)
        kappa_ata = spec[0] / spec[-1]
        if hrep.phi_min is not None and hrep.phi_min > 0:
            assert kappa_ata + 1e-9 >= 1.0 / math.sin(hrep.phi_min) ** 2
        norms = np.linalg.norm(sys_.a, axis=1)
        assert kappa_ata + 1e-9 >= (norms.max() / norms.min()) ** 2


def test_csv_serialization_markers():
    from heterosolve.serialize import csv_cell

    assert csv_cell(None) == "n/a"
    assert csv_cell(True) == "true"
    assert csv_cell(math.inf) == "inf"
    assert csv_cell(0.5) == "0.5"
