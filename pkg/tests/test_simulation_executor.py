import math
from unittest import TestCase

from greendc.simulation import map_jobs


def fn_to_run_square(data):
    return {'job': data['job'], 'value': data['job'] ** 2}


def fn_to_run_fail_on_odd(data):
    if data % 2:
        raise ValueError(f'odd job={data}')
    return data


class TestMapJobs(TestCase):
    def test_sequential(self):
        results, errors = map_jobs(fn_to_run_square, [{'job': i} for i in range(5)], nb_workers=0)
        assert [r['value'] for r in results] == [0, 1, 4, 9, 16]
        assert errors == [None] * 5

    def test_processes_keep_order(self):
        """
        Process a series of jobs. Make sure all jobs are processed exactly once and in order
        """
        results, errors = map_jobs(fn_to_run_square, [{'job': i} for i in range(10)], nb_workers=2)
        assert [r['job'] for r in results] == list(range(10))
        assert [r['value'] for r in results] == [i ** 2 for i in range(10)]
        assert errors == [None] * 10

    def test_failures_recorded(self):
        for nb_workers in (0, 2):
            results, errors = map_jobs(fn_to_run_fail_on_odd, list(range(4)), nb_workers=nb_workers)
            assert results[0] == 0 and results[2] == 2
            assert results[1] is None and results[3] is None
            assert errors[0] is None
            assert 'odd job=1' in errors[1]

    def test_builtin(self):
        results, errors = map_jobs(math.sqrt, [4.0, 9.0, -1.0], nb_workers=2)
        assert results[:2] == [2.0, 3.0]
        assert errors[2] is not None
