import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from spinepr import exact, model, wigner
from spinepr.exceptions import InvalidParameterException
from spinepr.model import ModelParams, SeedSpec
from spinepr.wigner import Trajectory

SMALL = ModelParams.matched(20.0)


class TestDrift(unittest.TestCase):
    def test_pump_only(self):
        d = wigner.drift(Trajectory(2.0, 0j, 0j), ModelParams(4.0, 4.0))
        self.assertAlmostEqual(2j, d.alpha0, places=12)
        self.assertEqual(0j, d.alpha_p1)
        self.assertEqual(0j, d.alpha_m1)
        self.assertEqual(0j, d.alpha_vac)

    def test_pair_creation(self):
        d = wigner.drift(Trajectory(1.0, 0j, 0.5), ModelParams(0.5, 0.0))
        # -i (alpha0^2 conj(alpha_m1) + (|alpha0|^2 - 1/2) alpha_p1)
        self.assertAlmostEqual(-0.5j, d.alpha_p1, places=12)

    def test_weyl_number(self):
        self.assertEqual(6.0, Trajectory(1.0, 1j, 2.0).weyl_number())


class TestSampleInitial(unittest.TestCase):
    def test_deterministic(self):
        first = wigner.sample_initial(SMALL, 7, 16)
        second = wigner.sample_initial(SMALL, 7, 16)
        np.testing.assert_array_equal(first.samples, second.samples)
        other = wigner.sample_initial(SMALL, 8, 16)
        self.assertFalse(np.array_equal(first.samples, other.samples))

    def test_substreams_do_not_depend_on_count(self):
        short = wigner.sample_initial(SMALL, 3, 10)
        long = wigner.sample_initial(SMALL, 3, 600)
        np.testing.assert_array_equal(short.samples[0], long.samples[0, :10])

    def test_too_few(self):
        with self.assertRaises(InvalidParameterException):
            wigner.sample_initial(SMALL, 0, 1)

    def test_vacuum_statistics(self):
        ensemble = wigner.sample_initial(ModelParams.matched(175.0), 11, 4096)
        m = wigner.moments_wigner(ensemble, 0.0)
        self.assertLess(abs(m.population(1)), 5.0 * m.error(model.N1))
        self.assertLess(abs(m.population(0) - 175.0), 5.0 * m.error(model.N0))
        self.assertEqual("wigner", m.origin)

    def test_thermal_statistics(self):
        ensemble = wigner.sample_initial(ModelParams.matched(175.0, SeedSpec.thermal(1.0)), 5, 4096)
        m = wigner.moments_wigner(ensemble, 0.0)
        self.assertLess(abs(m.population(-1) - 1.0), 5.0 * m.error(model.NM1))

    def test_thermal_pair_number(self):
        ensemble = wigner.sample_initial(ModelParams.matched(175.0, SeedSpec.thermal(1.0)), 13, 8192)
        m = wigner.moments_wigner(ensemble, 0.0)
        # independent thermal modes: <n1 n-1> = nbar^2
        self.assertLess(abs(m.value(model.N1_NM1).real - 1.0), 3.0 * m.error(model.N1_NM1))
        self.assertLess(abs(m.value(model.A1_AM1)), 3.0 * m.error(model.A1_AM1))

    def test_vacuum_port_is_idle(self):
        ensemble = wigner.sample_initial(SMALL, 2, 8)
        later = wigner.integrate_ensemble(ensemble, SMALL, [0.01])
        np.testing.assert_array_equal(ensemble.samples[0, :, 3], later.samples[0, :, 3])


class TestIntegrateEnsemble(unittest.TestCase):
    def setUp(self):
        self.ensemble = wigner.sample_initial(SMALL, 1, 32)

    def test_weyl_number_conserved(self):
        later = wigner.integrate_ensemble(self.ensemble, SMALL, [0.01, 0.02])
        before = [t.weyl_number() for t in self.ensemble.trajectories()]
        after = [t.weyl_number() for t in later.trajectories()]
        np.testing.assert_allclose(before, after, rtol=1e-8)
        self.assertEqual((), later.warnings)

    def test_grid(self):
        self.assertIs(self.ensemble, wigner.integrate_ensemble(self.ensemble, SMALL, []))
        with self.assertRaises(InvalidParameterException):
            wigner.integrate_ensemble(self.ensemble, SMALL, [0.02, 0.01])
        with self.assertRaises(InvalidParameterException):
            wigner.integrate_ensemble(self.ensemble, SMALL, [0.01], tol=0.0)

    def test_unrecorded_time(self):
        later = wigner.integrate_ensemble(self.ensemble, SMALL, [0.01])
        self.assertEqual(0, later.time_index(0.01))
        with self.assertRaises(InvalidParameterException):
            later.time_index(0.02)


class TestMomentSeries(unittest.TestCase):
    def test_matches_full_ensemble(self):
        taus = [0.005, 0.01]
        series = wigner.moment_series(SMALL, taus, 4, count=64, groups=4)
        ensemble = wigner.integrate_ensemble(wigner.sample_initial(SMALL, 4, 64), SMALL, taus)
        for entry, tau in zip(series, taus):
            full = wigner.moments_wigner(ensemble, tau)
            for key in model.CANONICAL_KEYS:
                self.assertLess(abs(entry.moments.value(key) - full.value(key)), 1e-9, str(key))
            self.assertEqual(4, len(entry.groups))

    def test_group_count(self):
        series = wigner.moment_series(SMALL, [0.001], 0, count=10, groups=16)
        self.assertEqual(5, len(series[0].groups))
        self.assertEqual([], wigner.moment_series(SMALL, [], 0, count=10))

    def test_agrees_with_exact(self):
        params = ModelParams.matched(50.0)
        tau = 0.004
        m = wigner.moment_series(params, [tau], 9, count=2048)[0].moments
        reference = exact.moments_exact(exact.evolve_exact(exact.init_coherent_pump(params), [tau])[-1])
        self.assertLess(abs(m.population(1) - reference.population(1)), 5.0 * m.error(model.N1) + 0.02)


    def test_thermal_ordering(self):
        tau = 0.006
        populations = []
        for nbar in (0.0, 0.5, 1.0, 2.0):
            params = ModelParams.matched(175.0, SeedSpec.thermal(nbar))
            m = wigner.moment_series(params, [tau], 17, count=1024, tol=1e-8)[0].moments
            populations.append((m.population(1), m.error(model.N1)))
        for (lower, lower_err), (upper, upper_err) in zip(populations, populations[1:]):
            self.assertGreater(upper - lower, 3.0 * (lower_err + upper_err))


class TestAgreesWithDenseOracle(unittest.TestCase):
    def test_initial_ordering(self):
        for seed in (SeedSpec.vacuum(), SeedSpec.thermal(0.5)):
            params = ModelParams.matched(4.0, seed)
            m = wigner.moments_wigner(wigner.sample_initial(params, 21, 8192), 0.0)
            reference = exact.dense_oracle(params, 0.0, 16, thermal_cut=12)
            for key in model.CANONICAL_KEYS:
                self.assertLess(abs(m.value(key) - reference.value(key)), 4.0 * m.error(key) + 2e-3,
                                f"{key} with {seed.kind.value} seed")

    def test_short_time_populations(self):
        # the truncation bias of the pair-creation rate is 1/N0 relative; at tau = 0.02 it stays
        # well inside the sampling error of 4096 trajectories
        params = ModelParams.matched(4.0)
        tau = 0.02
        m = wigner.moment_series(params, [tau], 23, count=4096)[0].moments
        reference = exact.dense_oracle(params, tau, 16)
        for key in (model.N0, model.N1, model.NM1):
            self.assertLess(abs(m.value(key).real - reference.value(key).real), 3.0 * m.error(key), str(key))


class TestDumpTrajectories(unittest.TestCase):
    def runTest(self):
        ensemble = wigner.integrate_ensemble(wigner.sample_initial(SMALL, 0, 4), SMALL, [0.01, 0.02])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "trajectories.csv")
            wigner.dump_trajectories(ensemble, path)
            frame = pd.read_csv(path)
        self.assertEqual(8, len(frame))
        self.assertEqual(["traj_id", "tau", "re_a0", "im_a0", "re_ap", "im_ap", "re_am", "im_am"], list(frame.columns))


if __name__ == '__main__':
    unittest.main()
