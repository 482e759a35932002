import json
import os
import tempfile
import unittest

from deepdiff import DeepDiff

from spinepr import manifest
from spinepr.exceptions import InvalidDataException
from spinepr.manifest import RunManifest
from spinepr.model import ModelParams, SeedSpec


def _sample() -> RunManifest:
    return RunManifest(
        command="epr",
        argv=["epr", "--n0", "175", "--backend", "wigner"],
        params=ModelParams.matched(175.0, SeedSpec.thermal(0.5)).to_dict(),
        backend="wigner",
        rng_seed=3,
        trajectories=2000,
        grids={"tau_max": 0.012, "tau_steps": 40},
        tolerances={"tol": 1e-10},
        outputs=["epr_175_thermal.csv"],
        warnings=["second", "first", "second"],
    )


class TestRunManifest(unittest.TestCase):
    def test_warnings_are_deduplicated(self):
        self.assertEqual(["first", "second"], _sample().to_dict()["warnings"])

    def test_defaults(self):
        m = RunManifest(command="analytic", argv=[], params={}, backend="analytic")
        self.assertEqual(list(manifest.ASSUMPTIONS), m.assumptions)
        self.assertTrue(m.tool_version)

    def test_round_trip(self):
        original = _sample()
        with tempfile.TemporaryDirectory() as tmp:
            path = manifest.write_manifest(original, os.path.join(tmp, "epr.json"))
            loaded = manifest.load_manifest(path)
        self.assertEqual(0, len(DeepDiff(original.to_dict(), loaded.to_dict())))


class TestManifestValidation(unittest.TestCase):
    def test_bad_backend(self):
        bad = RunManifest(command="epr", argv=[], params={}, backend="quantum")
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InvalidDataException):
                manifest.write_manifest(bad, os.path.join(tmp, "bad.json"))

    def test_not_json(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "broken.json")
            with open(path, "w", encoding="utf-8") as f:
                f.write("{not json")
            with self.assertRaises(InvalidDataException):
                manifest.load_manifest(path)

    def test_unknown_field(self):
        document = _sample().to_dict()
        document["operator"] = "someone"
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "extra.json")
            with open(path, "w", encoding="utf-8") as f:
                json.dump(document, f)
            with self.assertRaises(InvalidDataException):
                manifest.load_manifest(path)


if __name__ == '__main__':
    unittest.main()
