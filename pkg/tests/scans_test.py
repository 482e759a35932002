import math
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from spinepr import analytic, scans
from spinepr.exceptions import InvalidDataException, InvalidParameterException, RoutingException
from spinepr.manifest import load_manifest
from spinepr.model import ModelParams, SeedKind, SeedSpec
from spinepr.scans import Backend, ScanSettings, SweepAxis
from tests import test_data

HEADLINE = ModelParams.matched(test_data.headline_n0)
QUICK = ScanSettings(tau_max=0.012, tau_steps=25, theta_steps=64)
SAMPLED = ScanSettings(tau_max=0.012, tau_steps=25, theta_steps=64, trajectories=4096, rng_seed=3, tol=1e-8)


class TestScanSettings(unittest.TestCase):
    def test_grid(self):
        grid = QUICK.tau_grid()
        self.assertEqual(25, len(grid))
        self.assertEqual(0.0, grid[0])
        self.assertAlmostEqual(0.012, grid[-1], places=15)

    def test_invalid(self):
        with self.assertRaises(InvalidParameterException):
            ScanSettings(tau_steps=0)
        with self.assertRaises(InvalidParameterException):
            ScanSettings(theta_steps=4)
        with self.assertRaises(InvalidParameterException):
            ScanSettings(tau_max=-1.0)

    def test_to_dict(self):
        self.assertEqual("optimal", QUICK.to_dict()["variant"])


class TestRouting(unittest.TestCase):
    def test_exact_needs_vacuum(self):
        with self.assertRaises(RoutingException):
            scans.sweep_tau(HEADLINE.with_seed(SeedSpec.thermal(1.0)), [0.0, 0.001], Backend.EXACT, QUICK)

    def test_analytic_has_no_coherent_seed(self):
        with self.assertRaises(RoutingException):
            scans.sweep_tau(HEADLINE.with_seed(SeedSpec.coherent(1.0)), [0.0, 0.001], Backend.ANALYTIC, QUICK)


class TestSweepTau(unittest.TestCase):
    def test_empty_grid(self):
        result = scans.sweep_tau(HEADLINE, [], Backend.EXACT, QUICK)
        self.assertEqual((), result.points)
        self.assertEqual(0, len(scans.report_frame(result)))

    def test_bad_grid(self):
        with self.assertRaises(InvalidParameterException):
            scans.sweep_tau(HEADLINE, [0.002, 0.001], Backend.ANALYTIC, QUICK)

    def test_analytic_backend(self):
        result = scans.sweep_tau(HEADLINE, [0.0, test_data.measurement_tau], Backend.ANALYTIC, QUICK)
        self.assertEqual(SweepAxis.TAU, result.axis)
        self.assertIsNone(result.rng_seed)
        report = result.reports()[-1]
        self.assertAlmostEqual(test_data.epr_closed_form, report.upsilon, delta=1e-5)
        self.assertAlmostEqual(test_data.population_vacuum, report.n_signal, delta=1e-3)
        self.assertAlmostEqual(test_data.two_mode_variance_closed_form, report.var_xminus_min, delta=1e-4)
        self.assertAlmostEqual(test_data.inseparability_closed_form, report.insep_ratio, delta=1e-4)
        self.assertIn(analytic.VALIDITY_ADVISORY, result.warnings())

    def test_analytic_breakdown_is_nan(self):
        result = scans.sweep_tau(ModelParams.matched(10.0), [0.2], Backend.ANALYTIC, QUICK)
        self.assertTrue(math.isnan(result.reports()[0].upsilon))
        self.assertGreater(len(result.warnings()), 1)

    def test_exact_backend(self):
        result = scans.sweep_tau(ModelParams.matched(20.0), [0.0, 0.01, 0.02], Backend.EXACT, QUICK)
        self.assertEqual(3, len(result.points))
        self.assertAlmostEqual(1.0, result.reports()[0].upsilon, places=6)
        self.assertLess(result.reports()[-1].upsilon, 1.0)
        self.assertEqual(0.02, result.metadata["tau_max"])

    def test_wigner_matches_exact(self):
        for n0 in (150.0, 200.0):
            params = ModelParams.matched(n0)
            reference = scans.sweep_tau(params, [0.003], Backend.EXACT, SAMPLED).reports()[0]
            sampled = scans.sweep_tau(params, [0.003], Backend.WIGNER, SAMPLED).reports()[0]
            self.assertLess(abs(sampled.n_signal - reference.n_signal), 3.0 * sampled.n_signal_err, f"N0={n0:g}")
            self.assertLess(abs(sampled.upsilon - reference.upsilon), 3.0 * sampled.upsilon_err, f"N0={n0:g}")


class TestSweepSeed(unittest.TestCase):
    def test_thermal_noise_degrades_epr(self):
        result = scans.sweep_seed(175.0, [0.0, 0.5, 1.0], Backend.ANALYTIC, QUICK)
        self.assertEqual(SweepAxis.NBAR_TH, result.axis)
        values = [r.upsilon for r in result.reports()]
        self.assertLess(values[0], values[1])
        self.assertLess(values[1], values[2])
        self.assertEqual("thermal", result.metadata["seed_kind"])
        self.assertEqual(1.0, result.points[-1].params.seed.nbar_th)

    def test_monte_carlo_ordering(self):
        result = scans.sweep_seed(175.0, [0.0, 0.5, 1.0, 2.0], Backend.WIGNER, SAMPLED)
        values = [r.upsilon for r in result.reports()]
        for lower, upper in zip(values, values[1:]):
            self.assertLess(lower, upper)
        self.assertLess(values[0], 0.2)
        self.assertGreater(values[-1], 1.0)

    def test_list_validation(self):
        with self.assertRaises(InvalidParameterException):
            scans.sweep_seed(175.0, [1.0, 0.5], Backend.ANALYTIC, QUICK)
        with self.assertRaises(InvalidParameterException):
            scans.sweep_seed(175.0, [], Backend.ANALYTIC, QUICK)
        with self.assertRaises(InvalidParameterException):
            scans.sweep_seed(175.0, [0.5], Backend.ANALYTIC, QUICK, seed_kind=SeedKind.VACUUM)

    def test_coherent_routing(self):
        with self.assertRaises(RoutingException):
            scans.sweep_seed(175.0, [0.5], Backend.ANALYTIC, QUICK, seed_kind=SeedKind.COHERENT)


class TestSweepN0(unittest.TestCase):
    def runTest(self):
        result = scans.sweep_n0([100.0, 175.0, 400.0], SeedSpec.vacuum(), Backend.ANALYTIC, QUICK)
        values = [r.upsilon for r in result.reports()]
        self.assertGreater(values[0], values[1])
        self.assertGreater(values[1], values[2])
        np.testing.assert_array_equal([100.0, 175.0, 400.0], result.xs())
        self.assertEqual(100.0, result.points[0].params.q_over_g)


class TestSweepTheta(unittest.TestCase):
    def test_default_offsets(self):
        result = scans.sweep_theta(HEADLINE, backend=Backend.ANALYTIC, settings=QUICK)
        self.assertEqual(181, len(result.points))
        self.assertAlmostEqual(-math.pi / 2.0, result.xs()[0], places=12)
        self.assertIn("theta0", result.metadata)

    def test_optimum_at_zero_offset(self):
        result = scans.sweep_theta(HEADLINE, backend=Backend.ANALYTIC, settings=QUICK, offsets=[-0.5, 0.0, 0.5])
        values = [r.upsilon for r in result.reports()]
        self.assertLess(values[1], values[0])
        self.assertLess(values[1], values[2])


class TestThreshold(unittest.TestCase):
    def test_analytic(self):
        self.assertAlmostEqual(analytic.nth_max_ud(175.0, 0.01), scans.nth_threshold(175.0, 0.01, Backend.ANALYTIC),
                               places=12)

    def test_exact_is_rejected(self):
        with self.assertRaises(RoutingException):
            scans.nth_threshold(175.0, backend=Backend.EXACT)

    def test_tolerance(self):
        with self.assertRaises(InvalidParameterException):
            scans.nth_threshold(175.0, tol=0.0, backend=Backend.ANALYTIC)


class TestFitPowerLaw(unittest.TestCase):
    def test_exact_power_law(self):
        points = [(n0, 0.05 * n0 ** 0.6) for n0 in scans.FIT_N0_GRID]
        fit = scans.fit_power_law(points)
        self.assertAlmostEqual(0.6, fit.exponent, places=10)
        self.assertAlmostEqual(0.05, fit.prefactor, places=10)
        self.assertAlmostEqual(0.0, fit.residual, places=10)
        self.assertEqual((100.0, 400.0), fit.n0_range)
        self.assertAlmostEqual(0.05 * 250.0 ** 0.6, fit.predict(250.0), places=10)

    def test_invalid_data(self):
        with self.assertRaises(InvalidDataException):
            scans.fit_power_law([(100.0, 1.0), (200.0, 1.5), (300.0, 2.0)])
        with self.assertRaises(InvalidDataException):
            scans.fit_power_law([(100.0, 1.0), (200.0, -1.5), (300.0, 2.0), (400.0, 2.2)])
        with self.assertRaises(InvalidDataException):
            scans.fit_power_law([(100.0, 1.0), (200.0, math.nan), (300.0, 2.0), (400.0, 2.2)])


class TestReportFrame(unittest.TestCase):
    def setUp(self):
        self.result = scans.sweep_tau(HEADLINE, [0.0, 0.004, test_data.measurement_tau], Backend.ANALYTIC, QUICK)

    def test_headers(self):
        frame = scans.report_frame(self.result, ["n_signal", "upsilon"])
        self.assertEqual(["tau [dimensionless]", "n_signal [atoms]", "upsilon [dimensionless]"], list(frame.columns))
        self.assertEqual(3, len(frame))

    def test_unknown_field(self):
        with self.assertRaises(InvalidParameterException):
            scans.report_frame(self.result, ["entropy"])

    def test_analytic_curves(self):
        frame = scans.report_frame(self.result, ["upsilon"], analytic_curves=True)
        self.assertIn("analytic upsilon [dimensionless]", frame.columns)
        np.testing.assert_allclose(frame["upsilon [dimensionless]"], frame["analytic upsilon [dimensionless]"])

    def test_write_csv(self):
        frame = scans.report_frame(self.result)
        with tempfile.TemporaryDirectory() as tmp:
            path = scans.write_csv(frame, os.path.join(tmp, "epr.csv"))
            loaded = pd.read_csv(path)
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        self.assertEqual(list(frame.columns), list(loaded.columns))
        self.assertTrue(loaded["upsilon stderr [dimensionless]"].isna().all())
        self.assertIn("nan", text)
        self.assertNotIn("\r\n", text)


class TestFigureDataset(unittest.TestCase):
    def test_unknown_figure(self):
        with self.assertRaises(InvalidParameterException):
            scans.figure_dataset("F9z")

    def test_unknown_override(self):
        with self.assertRaises(InvalidParameterException):
            scans.figure_dataset("F1a", {"colour": "red"})

    def test_population_figure(self):
        settings = ScanSettings(tau_max=0.02, tau_steps=3, theta_steps=16)
        with tempfile.TemporaryDirectory() as tmp:
            csv_path, manifest_path = scans.figure_dataset("F1a", {"n0": 4.0, "n0_list": [4.0]}, tmp, settings)
            frame = pd.read_csv(csv_path)
            manifest = load_manifest(manifest_path)
        self.assertEqual("F1a_4_vacuum.csv", os.path.basename(csv_path))
        self.assertEqual("F1a_4_vacuum.json", os.path.basename(manifest_path))
        self.assertEqual(["tau [dimensionless]", "n_signal/N0 (N0=4) [fraction]", "n_signal/N0 (N0=4, q=0) [fraction]"],
                         list(frame.columns))
        self.assertEqual("exact", manifest.backend)
        self.assertIsNone(manifest.rng_seed)
        self.assertEqual(["F1a_4_vacuum.csv"], manifest.outputs)


if __name__ == '__main__':
    unittest.main()
