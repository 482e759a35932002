import unittest

from spinepr import workers


def _square(x: int) -> int:
    return x * x


class TestEffectiveWorkers(unittest.TestCase):
    def runTest(self):
        self.assertEqual(1, workers.effective_workers(1, 10))
        self.assertEqual(1, workers.effective_workers(8, 1))
        self.assertEqual(1, workers.effective_workers(0, 10))
        self.assertLessEqual(workers.effective_workers(64, 3), 3)


class TestParallelMap(unittest.TestCase):
    def test_serial(self):
        self.assertEqual([0, 1, 4, 9], workers.parallel_map(_square, range(4)))

    def test_pool_keeps_order(self):
        self.assertEqual([x * x for x in range(12)], workers.parallel_map(_square, range(12), workers=2))

    def test_empty(self):
        self.assertEqual([], workers.parallel_map(_square, [], workers=4))


if __name__ == '__main__':
    unittest.main()
