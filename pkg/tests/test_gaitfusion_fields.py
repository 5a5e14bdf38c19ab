'''Test gaitfusion.fields, gaitfusion.sections and gaitfusion.config'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import os

import pytest

from gaitfusion import CellKind, ConfigError, DataSource
import gaitfusion.config as config
import gaitfusion.fields as fields
import gaitfusion.sections as sections

@pytest.fixture()
def holder_class():

    # This is deliberately not created as a ConfigSection to help decouple the
    # ConfigField tests and the ConfigSection tests

    class Holder:
        int_field = fields.IntField(minimum=1, maximum=10)
        int_field_nullable = fields.IntField(nullable=True)
        real_field = fields.RealField(minimum=0.0, exclusive_minimum=True)
        boolean_field = fields.BooleanField()
        text_field = fields.TextField()
        choice_field = fields.ChoiceField(CellKind)
        int_list_field = fields.IntListField(minimum=0)
        text_list_field = fields.TextListField()
        path_field = fields.PathField(must_exist=False)

    return Holder

@pytest.fixture()
def holder(holder_class):
    return holder_class()

def test_int(holder):
    holder.int_field = 2
    assert holder.int_field == 2

    holder.int_field = ' 4 '
    assert holder.int_field == 4

    # IntField should not have accepted a float in a string value
    with pytest.raises(ValueError):
        holder.int_field = '1.2'

    # Nor a bool
    with pytest.raises(TypeError):
        holder.int_field = True

    # Range checks
    with pytest.raises(ValueError):
        holder.int_field = 0
    with pytest.raises(ValueError):
        holder.int_field = 11

    # IntField should not have accepted a None value.
    with pytest.raises(TypeError):
        holder.int_field = None

    holder.int_field_nullable = None
    assert holder.int_field_nullable is None

def test_realfield(holder, holder_class):

    holder.real_field = 1.5
    assert holder.real_field == 1.5

    holder.real_field = '1e-4'
    assert holder.real_field == 1e-4

    holder.real_field = 3
    assert isinstance(holder.real_field, float)

    # exclusive_minimum rejects the minimum itself
    with pytest.raises(ValueError):
        holder.real_field = 0.0

    assert holder_class.real_field.format_value(0.1) == '0.1'

def test_booleanfield(holder, holder_class):

    for text in ('yes', 'True', 'on', '1'):
        holder.boolean_field = text
        assert holder.boolean_field

    for text in ('no', 'FALSE', 'off', '0'):
        holder.boolean_field = text
        assert not holder.boolean_field

    with pytest.raises(ValueError):
        holder.boolean_field = 'maybe'

    assert holder_class.boolean_field.format_value(True) == 'true'

def test_textfield(holder):
    holder.text_field = '  Lorem Ipsum '
    assert holder.text_field == 'Lorem Ipsum'

    with pytest.raises(TypeError):
        holder.text_field = 42

def test_choicefield(holder, holder_class):

    holder.choice_field = 'gru'
    assert holder.choice_field == CellKind.GRU

    holder.choice_field = CellKind.MULTIGATED
    assert holder.choice_field == CellKind.MULTIGATED

    with pytest.raises(TypeError):
        holder.choice_field = 'lstm'

    assert holder_class.choice_field.format_value(CellKind.GRU) == 'gru'

def test_intlistfield(holder, holder_class):

    holder.int_list_field = '0-2, 5'
    assert holder.int_list_field == (0, 1, 2, 5)

    holder.int_list_field = [7, 3]
    assert holder.int_list_field == (7, 3)

    with pytest.raises(ValueError):
        holder.int_list_field = '1, x'

    # minimum applies to every element
    with pytest.raises(ValueError):
        holder.int_list_field = (1, -1)

    with pytest.raises(TypeError):
        holder.int_list_field = (1.5, 2)

    assert holder_class.int_list_field.format_value((1, 2)) == '1, 2'

def test_textlistfield(holder):

    holder.text_list_field = 'control, als,, park'
    assert holder.text_list_field == ('control', 'als', 'park')

def test_pathfield(holder_class):

    field = holder_class.path_field
    assert field.resolve('data.txt', '/base') == os.path.normpath('/base/data.txt')
    assert field.resolve('/abs/data.txt', '/base') == '/abs/data.txt'
    assert field.resolve('data.txt', None) == 'data.txt'
    assert field.resolve(None, '/base') is None

def test_section_defaults():

    section = sections.CorrMnnSection()
    assert section.hidden == 256
    assert section.mlp_widths == (128, 64, 32)
    assert section.learning_rate == 0.01
    assert section.batch_size == 256
    assert section.cell == CellKind.MULTIGATED

    section = sections.SfeSection(k_direct='3')
    assert section.k_direct == 3
    assert section.d_out is None

    with pytest.raises(ValueError):
        sections.SfeSection(no_such_key=1)

def test_section_copy():

    section = sections.HmmSection(states=4)
    duplicate = section._copy()
    duplicate.states = 7
    assert section.states == 4
    assert duplicate.states == 7

def test_colliding_field_names():

    # ConfigSectionMetaClass should not allow fields that collide with methods
    with pytest.raises(AttributeError):
        class BadSection(sections.ConfigSection, section_name='bad'):
            _copy = fields.IntField()

    with pytest.raises(Warning):
        class OtherBadSection(sections.ConfigSection, section_name='other_bad'):
            value = fields.IntField

def test_config_defaults():

    experiment = config.ExperimentConfig()
    assert experiment.dataset.source == DataSource.SYNTHETIC
    assert experiment.synth.classes == 4
    assert experiment.window.nodes == 10
    assert experiment.hmm.states == 10
    assert experiment.experiment.train_fraction == 0.8
    assert experiment.experiment.seed == 42
    assert experiment._class_count() == 4

    # SectionField only accepts its own section type
    with pytest.raises(ValueError):
        experiment.hmm = sections.SfeSection()

def test_parse_config_text():

    items = config.parse_config_text('''
# comment
; another comment
sfe.k_direct = 3   # inline comment
corrmnn.mlp_widths = 16,
    8, 4
''')
    assert items == [('sfe.k_direct', '3'), ('corrmnn.mlp_widths', '16,\n8, 4')]

    with pytest.raises(ConfigError, match='section headers'):
        config.parse_config_text('[sfe]\nk_direct = 3\n')

    with pytest.raises(ConfigError):
        config.parse_config_text('sfe.k_direct = 3\nsfe.k_direct = 4\n')

def test_load_config_text():

    experiment = config.load_config(text='sfe.k_direct = 3\ncorrmnn.cell = gru\n'
                                         'corrmnn.mlp_widths = 16, 8, 4\n',
                                    overrides={'experiment.seed': 7})
    assert experiment.sfe.k_direct == 3
    assert experiment.corrmnn.cell == CellKind.GRU
    assert experiment.corrmnn.mlp_widths == (16, 8, 4)
    assert experiment.experiment.seed == 7

    # _text should produce configuration that loads back to the same values
    reloaded = config.load_config(text=experiment._text())
    assert reloaded._items() == experiment._items()

def test_load_config_errors(tmp_path):

    with pytest.raises(ConfigError, match='Unknown configuration section'):
        config.load_config(text='nosuch.key = 1\n')

    with pytest.raises(ConfigError, match='section.key'):
        config.load_config(text='seed = 1\n')

    with pytest.raises(ConfigError, match='Invalid value'):
        config.load_config(text='sfe.k_direct = many\n')

    with pytest.raises(ConfigError, match='Invalid value'):
        config.load_config(text='sfe.no_such_key = 1\n')

    with pytest.raises(ConfigError, match='Unable to read'):
        config.load_config(str(tmp_path / 'missing.cfg'))

def test_validation_reports_every_problem():

    with pytest.raises(ConfigError) as excinfo:
        config.load_config(text='window.nodes = 3\nsfe.d_out = 4\n'
                                'corrmnn.mlp_widths = 8, 4\n')
    message = str(excinfo.value)
    assert 'window.channel1_timestep' in message
    assert 'window.channel2_timestep' in message
    assert 'sfe.d_out' in message
    assert 'mlp_widths' in message

    with pytest.raises(ConfigError, match='train_fraction'):
        config.load_config(text='experiment.train_fraction = 1.0\n')

    with pytest.raises(ConfigError, match='two classes'):
        config.load_config(text='synth.classes = 1\n')

    with pytest.raises(ConfigError, match='delimiter'):
        config.load_config(text='dataset.delimiter = ::\n')

def test_dataset_paths(tmp_path):

    (tmp_path / 'records.txt').write_text('s1 0 a.ts b.csv\n')
    cfg_path = tmp_path / 'exp.cfg'
    cfg_path.write_text('dataset.source = gaitndd\n'
                        'dataset.record_list = records.txt\n'
                        'dataset.channel2_columns = 0-3\n'
                        'dataset.delimiter = tab\n')

    experiment = config.load_config(str(cfg_path))
    assert experiment.dataset.record_list == str(tmp_path / 'records.txt')
    assert experiment.dataset.channel2_columns == (0, 1, 2, 3)
    assert experiment.dataset.field_delimiter() == '\t'
    assert experiment._class_count() is None

    cfg_path.write_text('dataset.source = gaitndd\n'
                        'dataset.record_list = missing.txt\n'
                        'dataset.channel2_columns = 0\n')
    with pytest.raises(ConfigError, match='does not exist'):
        config.load_config(str(cfg_path))

    # Path checks can be deferred
    experiment = config.load_config(str(cfg_path), check_paths=False)
    assert experiment.dataset.record_list.endswith('missing.txt')

    with pytest.raises(ConfigError, match='record_list is required'):
        config.load_config(text='dataset.source = csv\ndataset.channel1_columns = 0\n'
                                'dataset.channel2_columns = 1\n')

def test_example_configurations():

    doc_dir = os.path.join(os.path.dirname(__file__), '..', 'doc', 'examples')
    experiment = config.load_config(os.path.join(doc_dir, 'synthetic.cfg'))
    assert experiment.synth.classes == 4
    assert experiment.corrmnn.hidden == 32

    experiment = config.load_config(os.path.join(doc_dir, 'gaitndd.cfg'), check_paths=False)
    assert experiment.dataset.source == DataSource.GAITNDD
    assert experiment._class_count() == 4
