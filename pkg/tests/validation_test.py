import unittest

from spinepr.validation import CheckResult, ValidationSuite


class TestCheckResult(unittest.TestCase):
    def runTest(self):
        self.assertEqual("PASS pair-rabi: ok", str(CheckResult("pair-rabi", True, "ok")))
        self.assertEqual("FAIL oracle: off", str(CheckResult("oracle", False, "off")))


class TestValidationChecks(unittest.TestCase):
    def test_pair_rabi(self):
        result = ValidationSuite.pair_rabi_oscillation()
        self.assertTrue(result.passed, result.detail)

    def test_oracle(self):
        result = ValidationSuite.oracle_equivalence()
        self.assertTrue(result.passed, result.detail)

    def test_mode_symmetry(self):
        result = ValidationSuite.mode_symmetry()
        self.assertTrue(result.passed, result.detail)

    def test_short_time_limits(self):
        result = ValidationSuite.short_time_limits()
        self.assertTrue(result.passed, result.detail)

    def test_registry(self):
        self.assertEqual(4, len(ValidationSuite.checks()))


if __name__ == '__main__':
    unittest.main()
