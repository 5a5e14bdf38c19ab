'''This module defines the ConfigSection type that groups typed ConfigField values, and
the sections that make up an experiment configuration.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

from . import CellKind, DataSource
from . import fields

INVALID_SECTION_NAMES = None

class ConfigSectionMetaClass(type):
    '''This is a metaclass that automatically identifies the ConfigField member attributes
    added to new subclasses and creates additional private attributes to help order and
    access them.'''

    def __new__(mcs, name, bases, namespace, section_name=None, **kwds):

        mcs.prepare_section_namespace(mcs, namespace, INVALID_SECTION_NAMES)
        namespace['_section_name'] = section_name
        return type.__new__(mcs, name, bases, namespace)

    def prepare_section_namespace(cls, namespace, forbidden_names):
        '''This method receives an ordered dictionary of attributes attached to the new
        subclass and checks, indexes and processes them appropriately, adding additional
        items where necessary.'''

        slots = []
        _fields = dict()

        for key, value in namespace.items():
            if isinstance(value, fields.ConfigField):
                if forbidden_names and key in forbidden_names:
                    raise AttributeError('ConfigField {} has the same name as a method or '
                                         'internal attribute'.format(key))
                slots.append('_'+key)
                _fields[key] = value
            if isinstance(value, type) and issubclass(value, fields.ConfigField):
                raise Warning('A ConfigField subclass has been attached as {} rather than '
                              'an instance of the class. This is probably incorrect.'
                              .format(key))

        namespace['__slots__'] = tuple(slots)
        namespace['_fields'] = _fields

        return namespace

class ConfigSection(metaclass=ConfigSectionMetaClass):
    '''ConfigSection groups the typed values for one part of an experiment. It is not
    intended for direct use, but as an abstract class to be subclassed. New instances
    hold the default value of every field, which may be overridden by keyword
    arguments.'''

    def __init__(self, **kwargs):

        for key, field in self._fields.items():
            setattr(self, key, field.default)

        for key, value in kwargs.items():
            self._set(key, value)

    def __str__(self):
        result = 'section ' + str(self._section_name) + ':\n'
        for key, field in self._fields.items():
            result += '- {0} ({1}) = {2}\n'.format(key,
                                                   field.__class__.__name__,
                                                   str(getattr(self, key)))
        return result

    def _copy(self):
        '''Create a copy of an instance of a ConfigSection.'''

        result = self.__class__()
        for attribute in self.__slots__:
            setattr(result, attribute, getattr(self, attribute))
        return result

    def _set(self, key, value):
        '''Set a value stored in a ConfigField within this ConfigSection.'''

        if key not in self._fields:
            raise ValueError('{0} is not a valid key in section {1}.'
                             .format(key, self._section_name))
        setattr(self, key, value)

    @classmethod
    def _configfields(cls):
        '''Returns a iterable of ConfigField objects in the order they were defined in the
        ConfigSection subclass.'''

        return cls._fields.values()

    def _item_values(self):
        '''Returns a list of tuples of field names and values stored in this section.'''

        return [(key, getattr(self, key)) for key in self._fields]

    def _text_lines(self):
        '''Returns the lines of configuration text that would recreate this section.'''

        result = []
        for key, field in self._fields.items():
            value = getattr(self, key)
            if value is not None:
                result.append('{0}.{1} = {2}'.format(self._section_name, key,
                                                     field.format_value(value)))
        return result

    def _validate(self):
        '''Check constraints between the fields of this section, returning a list of
        error messages. Subclasses may extend this.'''

        return []

class DatasetSection(ConfigSection, section_name='dataset'):
    '''Where the bimodal samples come from. For gaitndd and csv sources, record_list names a
    text file with one record per line: subject id, class label, channel 1 path and channel
    2 path, separated by whitespace. delimiter applies to the tables read as csv channels
    and may be a single character or one of the words 'tab' and 'whitespace'.'''

    DELIMITER_WORDS = {'tab': '\t', 'whitespace': None}

    source = fields.ChoiceField(DataSource, default=DataSource.SYNTHETIC)
    record_list = fields.PathField(nullable=True)
    class_names = fields.TextListField(nullable=True)
    channel1_columns = fields.IntListField(nullable=True, minimum=0)
    channel1_header = fields.BooleanField(default=False)
    channel2_columns = fields.IntListField(nullable=True, minimum=0)
    channel2_header = fields.BooleanField(default=False)
    delimiter = fields.TextField(default=',')
    channel1_rate_hz = fields.RealField(default=1.0, minimum=0.0, exclusive_minimum=True)
    channel2_rate_hz = fields.RealField(default=300.0, minimum=0.0, exclusive_minimum=True)
    outlier_factor = fields.RealField(default=10.0, minimum=0.0, exclusive_minimum=True)
    manifest = fields.BooleanField(default=True)

    def _validate(self):
        result = []
        if self.source != DataSource.SYNTHETIC and self.record_list is None:
            result.append('dataset.record_list is required for {0} data'
                          .format(self.source.name.lower()))
        if self.source == DataSource.CSV and self.channel1_columns is None:
            result.append('dataset.channel1_columns is required for csv data')
        if self.source != DataSource.SYNTHETIC and self.channel2_columns is None:
            result.append('dataset.channel2_columns is required for {0} data'
                          .format(self.source.name.lower()))
        if self.delimiter.lower() not in self.DELIMITER_WORDS and len(self.delimiter) != 1:
            result.append('dataset.delimiter must be one character, \'tab\' or '
                          '\'whitespace\'')
        return result

    def field_delimiter(self):
        '''Return the delimiter to pass to load_csv_channel.'''

        return self.DELIMITER_WORDS.get(self.delimiter.lower(), self.delimiter)

class SynthSection(ConfigSection, section_name='synth'):
    '''Parameters of the synthetic bimodal generator.'''

    classes = fields.IntField(default=4, minimum=1)
    samples_per_class = fields.IntField(default=200, minimum=1)
    channel1_dim = fields.IntField(default=6, minimum=1)
    channel2_dim = fields.IntField(default=8, minimum=1)
    separation = fields.RealField(default=5.0, minimum=0.0)
    coupling = fields.RealField(default=0.5, minimum=0.0, maximum=1.0)
    persistence = fields.RealField(default=0.7, minimum=0.0, maximum=0.99)

class WindowSection(ConfigSection, section_name='window'):
    '''Window lengths and strides for each channel. nodes is the number of recurrent nodes
    T; each channel's timestep must be a multiple of it.'''

    nodes = fields.IntField(default=10, minimum=1)
    channel1_timestep = fields.IntField(default=10, minimum=1)
    channel1_stride = fields.IntField(default=10, minimum=1)
    channel2_timestep = fields.IntField(default=10, minimum=1)
    channel2_stride = fields.IntField(default=10, minimum=1)

    def _validate(self):
        result = []
        for channel in (1, 2):
            timestep = getattr(self, 'channel{0}_timestep'.format(channel))
            if timestep % self.nodes:
                result.append('window.channel{0}_timestep ({1}) is not a multiple of '
                              'window.nodes ({2})'.format(channel, timestep, self.nodes))
        return result

class SfeSection(ConfigSection, section_name='sfe'):
    '''Spatial feature extractor settings: GMM component counts for the three encoders,
    the strong-signal ratio and the LDA output dimension (default C-1).'''

    k_direct = fields.IntField(default=15, minimum=1)
    k_time = fields.IntField(default=20, minimum=1)
    k_freq = fields.IntField(default=20, minimum=1)
    strong_ratio = fields.RealField(default=1.0, minimum=0.0, maximum=1.0)
    d_out = fields.IntField(nullable=True, minimum=1)
    gmm_iterations = fields.IntField(default=100, minimum=1)

class CorrMnnSection(ConfigSection, section_name='corrmnn'):
    '''CorrMNN network shape and training settings.'''

    cell = fields.ChoiceField(CellKind, default=CellKind.MULTIGATED)
    hidden = fields.IntField(default=256, minimum=1)
    mlp_widths = fields.IntListField(default=(128, 64, 32), minimum=1)
    k_corr = fields.IntField(default=10, minimum=1)
    learning_rate = fields.RealField(default=0.01, minimum=0.0, exclusive_minimum=True)
    batch_size = fields.IntField(default=256, minimum=1)
    epochs = fields.IntField(default=50, minimum=1)
    cca_ridge = fields.RealField(default=1e-4, minimum=0.0, exclusive_minimum=True)
    corr_weight = fields.RealField(default=1.0, minimum=0.0)

    def _validate(self):
        if len(self.mlp_widths) != 3:
            return ['corrmnn.mlp_widths must list exactly three widths']
        return []

class HmmSection(ConfigSection, section_name='hmm'):
    '''Multi-switch discriminator settings.'''

    states = fields.IntField(default=10, minimum=1)
    iterations = fields.IntField(default=200, minimum=1)
    var_floor = fields.RealField(default=1e-3, minimum=0.0, exclusive_minimum=True)

class ExperimentSection(ConfigSection, section_name='experiment'):
    '''Protocol settings shared by all stages.'''

    train_fraction = fields.RealField(default=0.8, minimum=0.0, exclusive_minimum=True,
                                      maximum=1.0)
    seed = fields.IntField(default=42, minimum=0)
    ablation = fields.BooleanField(default=True)

    def _validate(self):
        if self.train_fraction >= 1.0:
            return ['experiment.train_fraction must be less than 1']
        return []

# This constant records all the method and attribute names used in ConfigSection so that
# the metaclass can detect any attempts to overwrite them in subclasses.

INVALID_SECTION_NAMES = frozenset(dir(ConfigSection))
