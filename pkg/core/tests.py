import threading

from django.test import SimpleTestCase, override_settings

from core.exceptions import ConfigError, DomainError, LargeSieveError, RangeError
from core.parallel import parallel_map, worker_count


class ParallelMapTests(SimpleTestCase):
    def test_keeps_input_order(self):
        self.assertEqual(parallel_map(lambda n: n * n, range(50), workers=4), [n * n for n in range(50)])

    def test_empty_input(self):
        self.assertEqual(parallel_map(lambda n: n, [], workers=3), [])

    def test_runs_on_worker_threads(self):
        names = parallel_map(lambda _: threading.current_thread().name, range(8), workers=2)
        self.assertTrue(all(name.startswith("lsl-worker") for name in names))

    @override_settings(LSL_THREADS=3)
    def test_worker_count_from_settings(self):
        self.assertEqual(worker_count(), 3)
        self.assertEqual(worker_count(5), 5)

    @override_settings(LSL_THREADS=0)
    def test_auto_worker_count(self):
        self.assertGreaterEqual(worker_count(), 1)


class ExceptionTests(SimpleTestCase):
    def test_hierarchy(self):
        for cls in (DomainError, RangeError, ConfigError):
            self.assertTrue(issubclass(cls, LargeSieveError))
        self.assertTrue(issubclass(LargeSieveError, ValueError))
