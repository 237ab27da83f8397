import os

import psutil

from .common import TestConfig, test_data
from denoisebid import config
from denoisebid.config import ConfigError


reference_data = \
"""
analysis_name: analysis
#working_dir: # not set to test defaulting to cwd
---
analysis_name: analysis_2
working_dir: %(existing_path)s
multiprocessing: -1
seed: 11
mode: joint
output: results/out.csv
---
#analysis_name: # not set to test inheritance
working_dir: %(nonexistent_path)s
multiprocessing: all
seed: -3
mode: foo
---
multiprocessing: half
seed: 2.5
---
multiprocessing: 2
output: %(tempdir)s/abs.csv
---
multiprocessing: 1000
---
multiprocessing: -1000
---
multiprocessing: foo
""" % test_data


class TestRootConfig(TestConfig):

    @classmethod
    def get_reference_data(cls):
        return reference_data

    def test_analysis_name(self):
        self.assertEqual(self.cfgs[0].analysis_name, 'analysis')
        self.assertEqual(self.cfgs[1].analysis_name, 'analysis_2')
        self.cfgs[3].analysis_name = 'analysis_3'
        self.assertEqual(self.cfgs[3].analysis_name, 'analysis_3')

    def test_analysis_id(self):
        self.assertEqual(self.cfgs[0].analysis_id, 'analysis_ctr_only')
        self.assertEqual(self.cfgs[1].analysis_id, 'analysis_2_joint')

    def test_section_inheritance(self):
        # 2 should inherit from 0, not 1:
        self.assertEqual(self.cfgs[2].analysis_name, 'analysis')

    def test_working_dir(self):
        self.assertEqual(self.cfgs[0].working_dir, os.getcwd())
        self.assertEqual(self.cfgs[1].working_dir, test_data['existing_path'])
        self.assertRaises(IOError, getattr, self.cfgs[2], 'working_dir')
        self.cfgs[7].working_dir = test_data['existing_path']
        self.assertEqual(self.cfgs[7].working_dir, test_data['existing_path'])
        self.assertRaises(
            IOError, setattr, self.cfgs[7], 'working_dir',
            test_data['nonexistent_path']
            )

    def test_seed(self):
        self.assertEqual(self.cfgs[0].seed, 0)
        self.assertEqual(self.cfgs[1].seed, 11)
        self.assertRaises(ConfigError, getattr, self.cfgs[2], 'seed')
        self.assertRaises(ConfigError, getattr, self.cfgs[3], 'seed')
        self.cfgs[3].seed = 4
        self.assertEqual(self.cfgs[3].seed, 4)

    def test_mode(self):
        self.assertEqual(self.cfgs[0].mode, 'ctr_only')
        self.assertEqual(self.cfgs[1].mode, 'joint')
        self.assertRaises(ConfigError, getattr, self.cfgs[2], 'mode')

    def test_output(self):
        self.assertEqual(
            self.cfgs[0].output,
            os.path.join(os.getcwd(), 'analysis_results.csv')
            )
        self.assertEqual(
            self.cfgs[1].output,
            os.path.join(test_data['existing_path'], 'results/out.csv')
            )
        self.assertEqual(
            self.cfgs[4].output,
            os.path.join(test_data['tempdir'], 'abs.csv')
            )

    def test_multiprocessing(self):
        ncpus = psutil.cpu_count(logical=True) or 1
        self.assertEqual(self.cfgs[0].multiprocessing, ncpus)
        self.assertEqual(self.cfgs[1].multiprocessing, max(ncpus - 1, 1))
        self.assertEqual(self.cfgs[2].multiprocessing, ncpus)
        self.assertEqual(self.cfgs[3].multiprocessing, max(ncpus//2, 1))
        self.assertEqual(self.cfgs[4].multiprocessing, min(2, ncpus))
        self.assertEqual(self.cfgs[5].multiprocessing, ncpus)
        self.assertEqual(self.cfgs[6].multiprocessing, 1)
        self.assertEqual(self.cfgs[7].multiprocessing, ncpus)
        self.cfgs[7].multiprocessing = 1
        self.assertEqual(self.cfgs[7].multiprocessing, 1)
        self.cfgs[7].multiprocessing = 'half'
        self.assertEqual(self.cfgs[7].multiprocessing, max(ncpus//2, 1))
        self.assertRaises(
            ConfigError, setattr, self.cfgs[7], 'multiprocessing', 'foo'
            )

    def test_dirty(self):
        self.assertFalse(self.cfgs[0].dirty)
        self.cfgs[0].seed = 5
        self.assertTrue(self.cfgs[0].dirty)


class TestOpen(TestConfig):

    @classmethod
    def get_reference_data(cls):
        return "- not\n- a mapping\n"

    def setUp(self):
        pass

    def tearDown(self):
        pass

    def test_non_mapping(self):
        self.assertRaises(ConfigError, config.open, self.file_name)

    def test_no_file(self):
        cfgs = config.open()
        self.assertEqual(len(cfgs), 1)
        self.assertEqual(cfgs[0].mode, 'ctr_only')

    def test_missing_file(self):
        self.assertRaises(IOError, config.open,
                          test_data['nonexistent_file'])
