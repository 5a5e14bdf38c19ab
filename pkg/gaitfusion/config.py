'''This module defines ExperimentConfig, which groups the ConfigSection instances that
together describe an experiment, and the functions that read it from the flat
'section.key = value' text format.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import configparser
import os

from . import ConfigError, DataSource
from . import fields, sections

IMPLICIT_SECTION = 'gaitfusion'

class SectionField:
    '''SectionField wraps a ConfigSection subclass for incorporating into a new
    ExperimentConfig subclass. It ensures that only the correct subclass type can be
    assigned to the attribute.'''

    def __init__(self, section_type):

        if not isinstance(section_type, type) or \
                not issubclass(section_type, sections.ConfigSection):
            raise TypeError('section_type parameter must refer to a ConfigSection subclass.')

        self._section_type = section_type
        self._name = None
        self._slot_name = None

    def __get__(self, instance, owner):
        if instance is not None:
            return instance.__getattribute__(self._slot_name)
        return self

    def __set_name__(self, owner, name):
        self._name = name
        self._slot_name = '_' + name

    def __set__(self, instance, value):
        if isinstance(value, self._section_type):
            instance.__setattr__(self._slot_name, value)
        else:
            raise ValueError('Value must be an instance of {0}'
                             .format(str(self._section_type.__name__)))

class ExperimentConfigMetaClass(type):
    '''This metaclass identifies all of the SectionField attributes created in an
    ExperimentConfig subclass and indexes them by the section name used in configuration
    text.'''

    def __new__(mcs, name, bases, namespace, **kwds):

        slots = []
        _sections = dict()

        for i in bases:
            if hasattr(i, '_sections'):
                _sections.update(i._sections)

        for key, value in namespace.items():
            if isinstance(value, SectionField):
                slots.append('_'+key)
                _sections[value._section_type._section_name] = key

        namespace['__slots__'] = tuple(slots)
        namespace['_sections'] = _sections

        return type.__new__(mcs, name, bases, namespace)

class ExperimentConfig(metaclass=ExperimentConfigMetaClass):
    '''ExperimentConfig holds one instance of each configuration section. A new instance
    holds the defaults, which reproduce the settings used for the four-class gait
    experiments on a synthetic dataset. Values are changed with _set using dotted keys, or
    loaded from text with load_config.'''

    dataset = SectionField(sections.DatasetSection)
    synth = SectionField(sections.SynthSection)
    window = SectionField(sections.WindowSection)
    sfe = SectionField(sections.SfeSection)
    corrmnn = SectionField(sections.CorrMnnSection)
    hmm = SectionField(sections.HmmSection)
    experiment = SectionField(sections.ExperimentSection)

    def __init__(self):
        for attribute in self._sections.values():
            field = getattr(self.__class__, attribute)
            setattr(self, attribute, field._section_type())

    def __str__(self):
        return ''.join(str(getattr(self, attribute)) for attribute in self._sections.values())

    def _copy(self):
        '''Create a deep copy of the configuration.'''

        result = self.__class__()
        for attribute in self._sections.values():
            setattr(result, attribute, getattr(self, attribute)._copy())
        return result

    def _section(self, section_name):
        '''Return the section instance stored under the name used in configuration
        text.'''

        if section_name not in self._sections:
            raise ConfigError('Unknown configuration section \'{0}\''.format(section_name))
        return getattr(self, self._sections[section_name])

    def _set(self, dotted_key, value):
        '''Set a value given a 'section.key' name. Errors in the name or value are
        reported as ConfigError.'''

        section_name, _, key = dotted_key.partition('.')
        if not key:
            raise ConfigError('Configuration key \'{0}\' is not of the form section.key'
                              .format(dotted_key))
        section = self._section(section_name)
        try:
            section._set(key, value)
        except (TypeError, ValueError) as err:
            raise ConfigError('Invalid value for {0}: {1}'.format(dotted_key, err)) from err

    def _items(self):
        '''Returns a list of ('section.key', value) tuples for every field.'''

        result = []
        for section_name, attribute in self._sections.items():
            for key, value in getattr(self, attribute)._item_values():
                result.append((section_name + '.' + key, value))
        return result

    def _text(self):
        '''Return configuration text that load_config would turn back into this
        configuration.'''

        lines = []
        for attribute in self._sections.values():
            lines.extend(getattr(self, attribute)._text_lines())
        return '\n'.join(lines) + '\n'

    def _class_count(self):
        '''Return the number of classes the configuration implies, or None if that can
        only be discovered from the data.'''

        if self.dataset.source == DataSource.SYNTHETIC:
            return self.synth.classes
        if self.dataset.class_names:
            return len(self.dataset.class_names)
        return None

    def _resolve_paths(self, base_dir):
        '''Make relative PathField values relative to base_dir.'''

        for attribute in self._sections.values():
            section = getattr(self, attribute)
            for field in section._configfields():
                if isinstance(field, fields.PathField):
                    setattr(section, field.name,
                            field.resolve(getattr(section, field.name), base_dir))

    def _validate(self, check_paths=True):
        '''Check every section and the constraints between sections, raising ConfigError
        listing all of the problems found.'''

        problems = []
        for attribute in self._sections.values():
            section = getattr(self, attribute)
            problems.extend(section._validate())
            if check_paths:
                for field in section._configfields():
                    value = getattr(section, field.name)
                    if isinstance(field, fields.PathField) and field.must_exist \
                            and value is not None and not os.path.exists(value):
                        problems.append('{0}.{1}: path \'{2}\' does not exist'
                                        .format(section._section_name, field.name, value))

        classes = self._class_count()
        if classes is not None and self.sfe.d_out is not None and self.sfe.d_out > classes - 1:
            problems.append('sfe.d_out ({0}) must be at most the class count minus one ({1})'
                            .format(self.sfe.d_out, classes - 1))
        if classes is not None and classes < 2:
            problems.append('at least two classes are required')

        if problems:
            raise ConfigError('Invalid configuration:\n  ' + '\n  '.join(problems))

def parse_config_text(text, source='<string>'):
    '''Parse the flat configuration grammar and return a list of ('section.key', value
    text) tuples in file order. Lines are 'section.key = value'; '#' and ';' start
    comments; values may continue on indented lines.'''

    parser = configparser.ConfigParser(interpolation=None,
                                       delimiters=('=',),
                                       comment_prefixes=('#', ';'),
                                       inline_comment_prefixes=('#',),
                                       default_section='__no_defaults__')
    parser.optionxform = str
    try:
        parser.read_string('[{0}]\n{1}'.format(IMPLICIT_SECTION, text), source=source)
    except configparser.Error as err:
        raise ConfigError('Unable to parse {0}: {1}'.format(source, err)) from err

    extra_sections = [name for name in parser.sections() if name != IMPLICIT_SECTION]
    if extra_sections:
        raise ConfigError('{0}: section headers such as [{1}] are not used - write keys as '
                          'section.key = value'.format(source, extra_sections[0]))

    return list(parser[IMPLICIT_SECTION].items())

def load_config(path=None, text=None, overrides=None, check_paths=True):
    '''Create an ExperimentConfig from a configuration file (or text), apply any
    overrides given as a dictionary of dotted keys, resolve relative paths against the
    file's directory and validate the result.'''

    config = ExperimentConfig()
    base_dir = None

    if path is not None:
        try:
            with open(path, 'r') as config_file:
                text = config_file.read()
        except OSError as err:
            raise ConfigError('Unable to read configuration file {0}: {1}'
                              .format(path, err)) from err
        base_dir = os.path.dirname(os.path.abspath(path))

    if text is not None:
        for key, value in parse_config_text(text, source=path or '<string>'):
            config._set(key, value)

    for key, value in (overrides or {}).items():
        config._set(key, value)

    config._resolve_paths(base_dir)
    config._validate(check_paths=check_paths)
    return config
