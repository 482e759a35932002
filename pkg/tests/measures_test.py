import math
import unittest

import numpy as np

from spinepr import measures, model
from spinepr.exceptions import CriterionUndefinedException, DepletedLocalOscillatorException, \
    InvalidParameterException
from spinepr.measures import InferredVariant, Objective, QuadratureConfig
from spinepr.model import MomentSet
from tests import test_data


def _distance_to(theta: float, target: float) -> float:
    """Distance on the pi-periodic phase circle."""
    d = (theta - target) % math.pi
    return min(d, math.pi - d)


class TestVacuumStart(unittest.TestCase):
    def runTest(self):
        m = test_data.undepleted_moments(0.0)
        for theta in (0.0, 0.4, 2.0):
            self.assertAlmostEqual(0.0, measures.generalized_quadrature_mean(m, theta, 1), places=12)
            self.assertAlmostEqual(1.0, measures.generalized_quadrature_variance(m, theta, 1), places=12)
            self.assertAlmostEqual(2.0, measures.two_mode_variance(m, theta, -1), places=12)
            self.assertAlmostEqual(1.0, measures.epr_parameter(m, theta), places=12)
            self.assertAlmostEqual(0.0, measures.correlation(m, theta), places=12)
            self.assertAlmostEqual(1.0, measures.inseparability_ratio(m, theta), places=12)
            self.assertAlmostEqual(1.0, measures.standard_quadrature_variance(m, theta, -1), places=12)


class TestThermalStart(unittest.TestCase):
    def runTest(self):
        m = test_data.undepleted_moments(0.0, nbar=1.0)
        self.assertAlmostEqual(test_data.thermal_xminus_at_zero, measures.two_mode_variance(m, 0.3, -1), places=10)


class TestQuadraturesAtMeasurementTime(unittest.TestCase):
    def setUp(self):
        self.m = test_data.undepleted_moments()

    def test_two_mode_minimum(self):
        theta, value = measures.optimize_phase(self.m, Objective.TWO_MODE_MINUS)
        self.assertLess(_distance_to(theta, 3.0 * math.pi / 4.0), 1e-4)
        self.assertAlmostEqual(test_data.two_mode_variance_from_moments, value, delta=1e-3)

    def test_inseparability_minimum(self):
        theta, value = measures.optimize_phase(self.m, Objective.INSEP)
        self.assertLess(_distance_to(theta, 3.0 * math.pi / 4.0), 1e-4)
        self.assertAlmostEqual(test_data.inseparability_from_moments, value, delta=5e-4)

    def test_correlation(self):
        self.assertAlmostEqual(test_data.correlation_at_quarter_pi, measures.correlation(self.m, math.pi / 4.0),
                               delta=1e-3)

    def test_covariance_is_vectorized(self):
        thetas = np.linspace(0.0, math.pi, 7)
        values = measures.generalized_quadrature_covariance(self.m, thetas)
        self.assertEqual((7,), np.shape(values))
        self.assertAlmostEqual(float(values[3]), float(measures.generalized_quadrature_covariance(self.m, thetas[3])),
                               places=12)


class TestEprShortTimeLimit(unittest.TestCase):
    def runTest(self):
        for tau in (0.001, 0.002, 0.003):
            m = test_data.undepleted_moments(tau)
            theta, value = measures.optimize_phase(m, Objective.EPR)
            expected = 1.0 / math.cosh(2.0 * 175.0 * tau) ** 2
            self.assertLess(abs(value - expected), 0.1 * expected)
            self.assertLess(min(_distance_to(theta, math.pi / 4.0), _distance_to(theta, 3.0 * math.pi / 4.0)), 1e-4)


class TestInferredVariants(unittest.TestCase):
    def setUp(self):
        self.m = test_data.undepleted_moments()

    def test_conditioning_never_increases_variance(self):
        for theta in np.linspace(0.0, math.pi, 13):
            self.assertLessEqual(measures.inferred_variance(self.m, theta, 1),
                                 measures.generalized_quadrature_variance(self.m, theta, 1) + 1e-12)

    def test_optimal_below_symmetric_difference(self):
        _, optimal = measures.optimize_phase(self.m, Objective.EPR, InferredVariant.OPTIMAL)
        _, symdiff = measures.optimize_phase(self.m, Objective.EPR, InferredVariant.SYMMETRIC_DIFFERENCE)
        self.assertLessEqual(optimal, symdiff)

    def test_bad_mode(self):
        with self.assertRaises(InvalidParameterException):
            measures.inferred_variance(self.m, 0.0, 0)
        with self.assertRaises(InvalidParameterException):
            measures.two_mode_variance(self.m, 0.0, 0)


class TestSymmetries(unittest.TestCase):
    def setUp(self):
        self.m = test_data.undepleted_moments(0.004, nbar=0.5)

    def test_signal_idler_exchange(self):
        theta, _ = measures.optimize_phase(self.m, Objective.EPR)
        self.assertAlmostEqual(measures.epr_parameter(self.m, theta, j=1),
                               measures.epr_parameter(self.m.swapped(), theta, j=-1), places=12)

    def test_phase_rotation(self):
        _, value = measures.optimize_phase(self.m, Objective.EPR)
        _, rotated = measures.optimize_phase(self.m.rotated(0.3), Objective.EPR)
        self.assertAlmostEqual(value, rotated, places=8)

    def test_scan_minimality(self):
        theta, value = measures.optimize_phase(self.m, Objective.INSEP, scan_points=64)
        grid = np.arange(512) * math.pi / 512
        self.assertLessEqual(value, float(np.min(measures.inseparability_ratio(self.m, grid))) + 1e-12)
        self.assertGreaterEqual(theta, 0.0)
        self.assertLess(theta, math.pi)


class TestUndefinedCriteria(unittest.TestCase):
    def test_depleted_local_oscillator(self):
        m = MomentSet.build(0.0, {model.N1: 1.0, model.NM1: 1.0})
        with self.assertRaises(DepletedLocalOscillatorException):
            measures.generalized_quadrature_mean(m, 0.0, 1)

    def test_signal_reaches_local_oscillator(self):
        m = MomentSet.build(0.0, {model.N0: 2.0, model.N1: 1.0, model.NM1: 1.0, model.N1_N0: 2.0,
                                  model.NM1_N0: 2.0})
        with self.assertRaises(CriterionUndefinedException):
            measures.epr_parameter(m, 0.0)

    def test_report_keeps_going(self):
        m = MomentSet.build(0.0, {model.N0: 2.0, model.N1: 1.0, model.NM1: 1.0, model.N1_N0: 2.0,
                                  model.NM1_N0: 2.0})
        report = measures.entanglement_report(m, scan_points=32)
        self.assertTrue(math.isnan(report.upsilon))
        self.assertTrue(any("epr" in w for w in report.warnings))
        fixed = measures.report_at_theta(m, 0.2)
        self.assertTrue(math.isnan(fixed.upsilon))


class TestQuadratureConfig(unittest.TestCase):
    def runTest(self):
        self.assertAlmostEqual(0.5, QuadratureConfig(0.5 + 2.0 * math.pi).theta, places=12)
        self.assertEqual(InferredVariant.SYMMETRIC_DIFFERENCE, InferredVariant("symdiff"))


class TestEntanglementReport(unittest.TestCase):
    def test_vacuum_start(self):
        report = measures.entanglement_report(test_data.undepleted_moments(0.0), scan_points=64)
        self.assertAlmostEqual(1.0, report.upsilon, places=10)
        self.assertAlmostEqual(2.0, report.var_xminus_min, places=10)
        self.assertAlmostEqual(1.0, report.insep_ratio, places=10)
        self.assertAlmostEqual(0.0, report.correlation_c, places=10)
        self.assertEqual(175.0, report.n_pump)

    def test_group_errors(self):
        m = test_data.undepleted_moments()
        report = measures.entanglement_report(m, groups=(m, m, m))
        self.assertEqual(0.0, report.upsilon_err)
        self.assertEqual(0.0, report.insep_err)
        groups = (test_data.undepleted_moments(0.0071), test_data.undepleted_moments(0.0075))
        spread = measures.entanglement_report(m, groups=groups)
        self.assertGreater(spread.upsilon_err, 0.0)

    def test_at_theta(self):
        m = test_data.undepleted_moments()
        report = measures.report_at_theta(m, 3.0 * math.pi / 4.0)
        self.assertAlmostEqual(test_data.two_mode_variance_from_moments, report.var_xminus_min, delta=1e-3)
        self.assertEqual(report.theta0, report.theta_xminus)
        self.assertEqual(["tau", "n_signal"], list(report.to_dict())[:2])


class TestTimeOptimization(unittest.TestCase):
    def test_parabolic_refinement(self):
        taus = np.linspace(0.0, 1.0, 11)
        reports = test_data.parabola_reports(taus, 0.53, 0.1)
        best = measures.optimize_time(reports, Objective.EPR)
        self.assertAlmostEqual(0.53, best.tau, places=9)
        self.assertAlmostEqual(0.1, best.upsilon, places=9)
        self.assertEqual(0.25, best.theta0)

    def test_edge_minimum(self):
        reports = test_data.parabola_reports([0.0, 0.1, 0.2], -1.0, 0.1)
        best = measures.optimize_time(reports, Objective.EPR)
        self.assertEqual(0.0, best.tau)

    def test_combined(self):
        taus = np.linspace(0.0, 1.0, 11)
        combined = measures.time_optimized_report(test_data.parabola_reports(taus, 0.53, 0.1))
        self.assertAlmostEqual(0.53, combined.tau_xminus, places=9)
        self.assertAlmostEqual(2.0, combined.var_xminus_min, places=9)
        # |tau - vertex| is not a parabola: the refinement moves off the grid point
        self.assertAlmostEqual(0.5 + 0.3 / 14.0, combined.tau_insep, places=9)
        self.assertAlmostEqual(1.03 - 0.09 / 28.0, combined.insep_ratio, places=9)

    def test_empty(self):
        with self.assertRaises(InvalidParameterException):
            measures.optimize_time([], Objective.EPR)


if __name__ == '__main__':
    unittest.main()
