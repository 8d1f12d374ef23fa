"""Position-space quadrature oracle for the vortex couplings."""

import numpy as np
import pytest

from rydsim import hydrogen
from rydsim.errors import QuadratureNotConverged


def test_phase_calibration_defect():
    for n in (3, 5, 8):
        mwf = hydrogen.calibrate_phases(n)
        assert mwf.calibration_defect < 1e-10


def test_identity_operator_overlaps():
    mwf = hydrogen.calibrate_phases(5)
    for ma, mb in ((0.0, 0.0), (1.0, -2.0), (2.0, 2.0), (-1.0, 0.0)):
        w = hydrogen.vortex_element(mwf, 0, 0, 0, ma, mb)
        assert abs(w - 1.0) < 1e-10


def test_proportionality_edge_row():
    rep = hydrogen.proportionality_report(5, 2, 0, m_b=2.0)
    assert rep.max_relative_deviation < 1e-6


def test_proportionality_full_grid_and_mixed_signs():
    rep = hydrogen.proportionality_report(5, 2, 0)
    assert rep.max_relative_deviation < 1e-10
    mixed = hydrogen.proportionality_report(5, 2, -1)
    assert mixed.max_relative_deviation < 1e-10


def test_scaling_exponent_quick():
    exponent, consts = hydrogen.scaling_exponent(1, 0, 0, n_values=(4, 6, 8))
    assert abs(exponent - 1.0) < 0.02
    assert np.all(np.diff(np.abs(consts)) > 0.0)


def test_quadrature_convergence_guard():
    with pytest.raises(QuadratureNotConverged):
        hydrogen.proportionality_report(8, 2, 0, radial_nodes=5)
