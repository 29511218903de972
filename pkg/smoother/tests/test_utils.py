import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from ..modules.base_config import ConfigError, load_config
from ..utils import (DataError, atomic_write, read_json, read_long_csv, read_truth, sha256_file, to_jsonable,
                     write_json, write_long_csv, write_truth)
from .factories import small_simulation


class FileTestCase(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = self.tmp / name
        path.write_text(text)
        return path


class LongCsvTests(FileTestCase):

    def test_curves_keep_first_appearance_order_and_points_are_sorted(self):
        path = self.write('data.csv', "curve_id,t,y\nb,0.5,2\na,0.1,1\nb,0.2,3\na,0.3,4\n")
        data = read_long_csv(path)
        self.assertEqual([c.curve_id for c in data.curves], ['b', 'a'])
        assert_allclose(data.curves[0].grid, [0.2, 0.5])
        assert_allclose(data.curves[0].values, [3.0, 2.0])
        self.assertEqual(data.domain, (0.1, 0.5))

    def test_numeric_ids_stay_strings(self):
        data = read_long_csv(self.write('data.csv', "curve_id,t,y\n007,0.1,1\n007,0.2,1\n"))
        self.assertEqual(data.curves[0].curve_id, '007')

    def test_write_then_read_preserves_values(self):
        sim = small_simulation(n=3, p=6, grid_mode='random')
        write_long_csv(self.tmp / 'observed.csv', sim.observed)
        data = read_long_csv(self.tmp / 'observed.csv', domain=sim.observed.domain)
        for a, b in zip(data.curves, sim.observed.curves):
            self.assertEqual(a.curve_id, b.curve_id)
            assert_array_equal(a.grid, b.grid)
            assert_array_equal(a.values, b.values)

    def test_errors(self):
        cases = {
            'missing.csv': None,
            'empty.csv': "",
            'columns.csv': "curve_id,t\na,0.1\n",
            'header.csv': "curve_id,t,y\n",
            'text.csv': "curve_id,t,y\na,0.1,abc\n",
            'blank.csv': "curve_id,t,y\na,0.1,\n",
            'duplicate.csv': "curve_id,t,y\na,0.1,1\na,0.1,2\n",
        }
        for name, text in cases.items():
            with self.subTest(file=name):
                path = self.tmp / name if text is None else self.write(name, text)
                with self.assertRaises(DataError):
                    read_long_csv(path)

    def test_declared_domain_must_cover_the_data(self):
        path = self.write('data.csv', "curve_id,t,y\na,0.1,1\na,2.0,1\n")
        with self.assertRaises(DataError):
            read_long_csv(path, domain=(0.0, 1.0))


class JsonTests(FileTestCase):

    def test_non_finite_values_become_null(self):
        payload = {'a': np.array([1.0, np.nan]), 'b': np.float64(np.inf), 'c': np.int64(3), 'd': np.bool_(True)}
        self.assertEqual(to_jsonable(payload), {'a': [1.0, None], 'b': None, 'c': 3, 'd': True})

    def test_write_json_is_sorted_and_readable(self):
        path = self.tmp / 'out' / 'results.json'
        write_json(path, {'z': 1, 'a': (1, 2)})
        text = path.read_text()
        self.assertLess(text.index('"a"'), text.index('"z"'))
        self.assertEqual(read_json(path), {'a': [1, 2], 'z': 1})
        self.assertEqual(json.loads(text)['z'], 1)

    def test_atomic_write_leaves_no_temp_files(self):
        atomic_write(self.tmp / 'a.txt', 'hello')
        atomic_write(self.tmp / 'b.bin', b'\x00\x01')
        self.assertEqual(sorted(p.name for p in self.tmp.iterdir()), ['a.txt', 'b.bin'])
        self.assertEqual(len(sha256_file(self.tmp / 'a.txt')), 64)


class TruthFileTests(FileTestCase):

    def test_truth_round_trip(self):
        sim = small_simulation(n=3, p=5)
        write_truth(self.tmp, sim.truth, sim.reference_grid, sim.true_mean, sim.true_cov)
        write_json(self.tmp / 'manifest.json', {'design': sim.design.to_dict()})
        truth = read_truth(self.tmp)
        assert_allclose(truth.grid, sim.reference_grid)
        assert_allclose(truth.covariance, sim.true_cov)
        assert_allclose(truth.mean, sim.true_mean)
        self.assertAlmostEqual(truth.noise_variance, 1.25)
        self.assertEqual(truth.truth.n, 3)

    def test_truth_without_manifest_has_no_noise_variance(self):
        sim = small_simulation(n=2, p=5)
        write_truth(self.tmp, sim.truth, sim.reference_grid, sim.true_mean, sim.true_cov)
        self.assertIsNone(read_truth(self.tmp).noise_variance)


class LoadConfigTests(FileTestCase):

    def test_yaml_and_json_documents(self):
        self.assertEqual(load_config(self.write('a.yaml', "n: 5\n")), {'n': 5})
        self.assertEqual(load_config(self.write('b.json', '{"n": 6}')), {'n': 6})
        self.assertEqual(load_config(self.write('c.yaml', "")), {})

    def test_bad_documents(self):
        with self.assertRaises(ConfigError):
            load_config(self.tmp / 'missing.yaml')
        with self.assertRaises(ConfigError):
            load_config(self.write('list.yaml', "- 1\n- 2\n"))
        with self.assertRaises(ConfigError):
            load_config(self.write('broken.yaml', "n: [1, 2\n"))
