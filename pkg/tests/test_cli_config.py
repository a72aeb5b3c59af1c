import os
import tempfile
from unittest import TestCase, mock

import numpy as np

import utils
from greendc.cli import ConfigError, load_config, create_default_options, default_config, SCHEMA_VERSION, \
    OUTPUT_ROOT_VARIABLE


MINIMAL = {
    'schema_version': 1,
    'data_centers': [{'max_servers': 100}],
    'classes': [{'deadline': 1.0, 'income': 0.01, 'penalty': 0.005, 'per_server_capacity': 10.0,
                 'drop_threshold': 1.0}],
}


class TestLoadConfig(TestCase):
    def test_minimal(self):
        config = load_config(utils.write_config(MINIMAL))
        assert len(config.dcs) == 1
        assert len(config.classes) == 1
        dc = config.dcs[0]
        assert dc.name == 'dc0'
        assert dc.idle_power == 0.1
        assert dc.peak_power == 0.2
        assert dc.pue == 1.2
        assert dc.network_delay == 0.0
        assert config.classes[0].name == 'class0'
        assert config.solve_options.tolerance == 1e-7
        assert config.solve_options.multistart == 3
        assert config.solve_options.search.n_max == 1000
        assert config.solve_options.search.patience == 50
        assert config.run_options.baselines == ('mm1', 'equal_split')
        assert config.slot is None
        assert config.generator is None
        assert config.trace_paths == []
        assert config.report_format == 'table'
        assert config.options['schema_version'] == SCHEMA_VERSION

    def test_invalid_pue(self):
        options = utils.config_options()
        options['data_centers'][0]['pue'] = 0.9
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        e = context.exception
        assert e.field == 'data_centers[0]'
        assert 'pue must be >= 1' in str(e)
        assert e.exit_code == 2
        assert e.as_dict()['category'] == 'config'

    def test_evaluation_instance(self):
        options = utils.config_options(nb_dcs=3, nb_classes=2)
        for dc in options['data_centers']:
            dc.update({'peak_power': 0.2, 'idle_power': 0.1, 'pue': 1.2})
        with self.assertLogs('greendc.cli.config', level='INFO') as logs:
            config = load_config(utils.write_config(options))
        assert [dc.name for dc in config.dcs] == ['dc0', 'dc1', 'dc2']
        assert [c.name for c in config.classes] == ['class0', 'class1']
        assert config.slot is not None
        assert np.allclose(config.slot.green_energy, [1.0, 2.0, 3.0])
        assert np.allclose(config.slot.brown_price, [0.05, 0.08, 0.11])
        assert config.slot.slot_length == 900.0
        # rate_std defaults to the fallback coefficient of variation
        assert abs(config.slot.class_stats[1].cv - 0.3) < 1e-12
        assert abs(config.slot.class_stats[1].mean_rate - 150.0) < 1e-12
        echoed = '\n'.join(logs.output)
        assert 'peak_power=0.2' in echoed
        assert 'idle_power=0.1' in echoed
        assert 'pue=1.2' in echoed

    def test_options_echoed(self):
        options = utils.config_options(solver={'multistart': 2})
        with self.assertLogs('greendc.cli.config', level='DEBUG') as logs:
            load_config(utils.write_config(options))
        echoed = '\n'.join(logs.output)
        assert 'option solver.multistart=2' in echoed
        assert 'option simulator.gain_grid_size=100' in echoed

    def test_parse_error_location(self):
        text = '{\n  "schema_version": 1,\n  "classes": [,]\n}\n'
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(text))
        e = context.exception
        assert e.line == 3
        assert e.column == 15
        assert ':3:15:' in str(e)

    def test_unknown_field(self):
        options = utils.config_options(solver={'tolerence': 1e-3})
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'solver.tolerence'

    def test_unknown_data_center_field(self):
        options = utils.config_options()
        options['data_centers'][0]['pues'] = 1.5
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'data_centers[0]'
        assert 'pues' in str(context.exception)

    def test_schema_version(self):
        options = utils.config_options(schema_version=2)
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'schema_version'

    def test_no_data_center(self):
        options = utils.config_options()
        options['data_centers'] = []
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'data_centers'

    def test_duplicated_names(self):
        options = utils.config_options(nb_dcs=2)
        options['data_centers'][1]['name'] = 'dc0'
        with self.assertRaises(ConfigError):
            load_config(utils.write_config(options))

    def test_network_delay(self):
        options = utils.config_options()
        options['data_centers'][0]['network_delay'] = 0.5
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert 'network_delay' in str(context.exception)

    def test_slot_size(self):
        options = utils.config_options(nb_dcs=2)
        options['slot']['brown_price'] = [0.1]
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'slot.brown_price'

    def test_solver_option(self):
        options = utils.config_options(solver={'loss_model': 'mm1', 'n_max': 200})
        config = load_config(utils.write_config(options))
        assert config.solve_options.loss_model == 'mm1'
        assert config.solve_options.search.n_max == 200
        assert config.run_options.solve.loss_model == 'mm1'

    def test_unreadable(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(utils.root_output, 'no_such_config.json'))

    def test_trace_paths(self):
        folder = tempfile.mkdtemp(dir=utils.root_output)
        with open(os.path.join(folder, 'traces.csv'), 'w') as f:
            f.write('timestamp,green_kw:dc0,price:dc0,rate:class0\n0,1,0.1,10\n')
        options = utils.config_options(traces={'paths': ['traces.csv'], 'slot_length': 3600.0})
        config = load_config(utils.write_config(options, folder=folder))
        assert config.trace_paths == [os.path.join(folder, 'traces.csv')]
        assert config.slot_length == 3600.0

    def test_missing_trace_file(self):
        options = utils.config_options(traces={'paths': ['missing.csv']})
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'traces.paths[0]'

    def test_trace_missing_column(self):
        folder = tempfile.mkdtemp(dir=utils.root_output)
        with open(os.path.join(folder, 'traces.csv'), 'w') as f:
            f.write('timestamp,green_kw:dc0,price:dc0\n0,1,0.1\n')
        options = utils.config_options(traces={'paths': ['traces.csv']})
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options, folder=folder))
        assert 'rate:class0' in str(context.exception)

    def test_generator(self):
        generator = {'nb_slots': 4, 'slot_length': 900.0, 'samples_per_slot': 60, 'seed': 3,
                     'dcs': [{'green_mean_kw': 5.0, 'price_mean': 0.08}],
                     'classes': [{'mean_rate': 80.0, 'cv': 0.2}]}
        options = utils.config_options(traces={'generator': generator})
        config = load_config(utils.write_config(options))
        assert config.generator.nb_slots == 4
        assert config.generator.dc_names == ('dc0',)
        assert config.generator.classes[0].mean_rate == 80.0
        assert config.generator_seed == 3

    def test_audit_grid(self):
        options = utils.config_options(validation={'audit': {'t_max': 1.0, 't_step': 0.5, 'n_max': 4}})
        config = load_config(utils.write_config(options))
        assert config.audit_grid.t_values == (0.0, 0.5, 1.0)
        assert config.audit_grid.n_values == (1, 2, 3, 4)

    def test_report_format(self):
        options = utils.config_options(report={'format': 'xml'})
        with self.assertRaises(ConfigError) as context:
            load_config(utils.write_config(options))
        assert context.exception.field == 'report.format'


class TestDefaults(TestCase):
    def test_defaults_in_one_place(self):
        options = create_default_options()
        assert options['schema_version'] == SCHEMA_VERSION
        assert options['solver']['n_max'] == 1000
        assert options['simulator']['baselines'] == ['mm1', 'equal_split']
        # a fresh copy each time
        options['solver']['n_max'] = 5
        assert create_default_options()['solver']['n_max'] == 1000

    def test_default_config(self):
        config = default_config()
        assert config.dcs == []
        assert config.loss_battery.cfg.replications == 20
        assert len(config.audit_grid.t_values) == 101

    def test_output_root_variable(self):
        with mock.patch.dict(os.environ, {OUTPUT_ROOT_VARIABLE: '/tmp/greendc_root'}):
            config = load_config(utils.write_config(MINIMAL))
            assert config.output_directory == '/tmp/greendc_root'
        with mock.patch.dict(os.environ, {OUTPUT_ROOT_VARIABLE: ''}):
            config = load_config(utils.write_config(MINIMAL))
            assert config.output_directory == os.path.join('.', 'greendc_output')
        options = dict(MINIMAL, output_directory='/tmp/explicit')
        config = load_config(utils.write_config(options))
        assert config.output_directory == '/tmp/explicit'
