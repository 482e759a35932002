import unittest

from deepdiff import DeepDiff

from spinepr import config
from spinepr.exceptions import ConfigurationException
from spinepr.measures import InferredVariant
from spinepr.model import SeedKind
from spinepr.scans import Backend
from tests import test_data


class TestParseConfig(unittest.TestCase):
    def test_sections_and_quotes(self):
        values = config.parse_config(test_data.config_text)
        expected = {"n0": 175, "q": "matched", "tau_steps": 40, "seed.kind": "thermal", "seed.nbar": 0.5}
        self.assertEqual(0, len(DeepDiff(expected, values)))

    def test_coercion(self):
        values = config.parse_config("tol = 1e-9\nrng_seed = 42\nout = 'runs/a b'")
        self.assertIsInstance(values["rng_seed"], int)
        self.assertEqual(1e-9, values["tol"])
        self.assertEqual("runs/a b", values["out"])

    def test_malformed_line(self):
        with self.assertRaises(ConfigurationException):
            config.parse_config("n0 175")
        with self.assertRaises(ConfigurationException):
            config.parse_config("[seed]\n= 3")


class TestLoadConfig(unittest.TestCase):
    def test_file(self):
        values = config.load_config("tests/resources/thermal_headline.cfg")
        self.assertEqual("wigner", values["backend"])
        self.assertEqual(2000, values["trajectories"])
        self.assertEqual(0.5, values["seed.nbar"])

    def test_unknown_key(self):
        with self.assertRaises(ConfigurationException):
            config.load_config("tests/resources/bad_key.cfg")

    def test_missing_file(self):
        with self.assertRaises(ConfigurationException):
            config.load_config("tests/resources/no_such_file.cfg")


class TestValidateConfig(unittest.TestCase):
    def runTest(self):
        config.validate_config({"n0": 100, "q": 12.5})
        with self.assertRaises(ConfigurationException):
            config.validate_config({"n0": -1})
        with self.assertRaises(ConfigurationException):
            config.validate_config({"q": "mismatched"})
        with self.assertRaises(ConfigurationException):
            config.validate_config({"p_over_g": 0.3})
        with self.assertRaises(ConfigurationException):
            config.validate_config({"seed.kind": "squeezed"})


class TestMergeConfig(unittest.TestCase):
    def test_defaults(self):
        merged = config.merge_config()
        self.assertEqual(0, len(DeepDiff(config.DEFAULTS, merged)))

    def test_precedence(self):
        file_layer = config.parse_config(test_data.config_text)
        merged = config.merge_config(file_layer, {"tau_steps": 80, "n0": None})
        self.assertEqual(80, merged["tau_steps"])
        self.assertEqual(175, merged["n0"])
        self.assertEqual("thermal", merged["seed.kind"])
        self.assertEqual(20000, merged["trajectories"])

    def test_q_over_g_alias(self):
        merged = config.merge_config({"q_over_g": 150.0})
        self.assertEqual(150.0, merged["q"])
        self.assertNotIn("q_over_g", merged)
        with self.assertRaises(ConfigurationException):
            config.merge_config({"q_over_g": 150.0, "q": 100.0})

    def test_invalid_layer(self):
        with self.assertRaises(ConfigurationException):
            config.merge_config({"theta_steps": 4})


class TestConfigConversion(unittest.TestCase):
    def test_params(self):
        params = config.params_from_config(config.merge_config(config.parse_config(test_data.config_text)))
        self.assertEqual(175.0, params.q_over_g)
        self.assertEqual(SeedKind.THERMAL, params.seed.kind)
        self.assertEqual(0.5, params.seed.nbar_th)
        detuned = config.params_from_config(config.merge_config({"q": 90.0, "seed.kind": "coherent",
                                                                 "seed.alpha_sq": 2.0}))
        self.assertEqual(90.0, detuned.q_over_g)
        self.assertEqual(2.0, detuned.seed.alpha_seed_sq)

    def test_settings(self):
        settings = config.settings_from_config(config.merge_config({"inferred": "symdiff", "threads": 3}))
        self.assertEqual(InferredVariant.SYMMETRIC_DIFFERENCE, settings.variant)
        self.assertEqual(3, settings.workers)
        self.assertEqual(600, settings.tau_steps)

    def test_backend(self):
        self.assertEqual(Backend.EXACT, config.backend_from_config(config.merge_config()))


if __name__ == '__main__':
    unittest.main()
