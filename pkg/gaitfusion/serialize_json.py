'''This module defines custom JSON encoders/decoders for gaitfusion types.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import enum
import json
import math

import numpy as np

from . import ConfigError
from . import config
from . import metrics
from . import sections

class GaitFusionEncoder(json.JSONEncoder):
    '''This class extends json.JSONEncoder to handle the encoding of ConfigSection,
    ExperimentConfig and MetricsReport values, as well as numpy scalars and arrays. Keys
    are added to identify the JSON object as a section, a configuration or a report.
    Non-finite reals are stored as null.'''

    @classmethod
    def serialize_value(cls, value):
        '''This method turns values into suitable types for the parent JSONEncoder class to
        encode. Enumerations are stored as their lower-case member name, which the
        ChoiceField that holds them knows how to accept.'''

        if isinstance(value, (bool, str)) or value is None:
            return value
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            return float(value) if math.isfinite(value) else None
        if isinstance(value, enum.Enum):
            return value.name.lower()
        if isinstance(value, (list, tuple, np.ndarray)):
            return [cls.serialize_value(v) for v in value]
        if isinstance(value, dict):
            return {str(k): cls.serialize_value(v) for k, v in value.items()}
        raise TypeError('Unable to serialize type {} for JSON'.format(str(type(value))))

    @classmethod
    def serialize_section(cls, obj, details=True):
        '''This method turns a ConfigSection into a dictionary of its field values.'''

        result = dict()
        if details:
            result['__ConfigSection__'] = obj._section_name
        for key, value in obj._item_values():
            result[key] = cls.serialize_value(value)
        return result

    @classmethod
    def serialize_config(cls, obj):
        '''This method turns an ExperimentConfig into a dictionary holding one dictionary
        per section.'''

        result = dict()
        result['__ExperimentConfig__'] = obj.__class__.__name__
        for section_name, attribute in obj._sections.items():
            result[section_name] = cls.serialize_section(getattr(obj, attribute),
                                                         details=False)
        return result

    @classmethod
    def serialize_report(cls, obj):
        '''This method turns a MetricsReport into a dictionary. ROC curves are stored as
        lists of [threshold, fpr, tpr] points with the leading infinite threshold as
        null.'''

        result = dict()
        result['__MetricsReport__'] = obj.__class__.__name__
        result['class_names'] = list(obj.class_names)
        result['accuracy'] = cls.serialize_value(obj.accuracy)
        result['per_class_accuracy'] = cls.serialize_value(obj.per_class_accuracy)
        result['confusion'] = cls.serialize_value(obj.confusion)
        result['auc'] = cls.serialize_value(obj.auc)
        result['roc'] = {name: cls.serialize_value(curve.rows())
                         for name, curve in zip(obj.class_names, obj.roc)}
        result['ablation'] = cls.serialize_value(obj.ablation)
        result['timings'] = cls.serialize_value(obj.timings)
        return result

    def default(self, o): # pylint: disable=E0202
        if isinstance(o, sections.ConfigSection):
            return self.serialize_section(o)
        if isinstance(o, config.ExperimentConfig):
            return self.serialize_config(o)
        if isinstance(o, metrics.MetricsReport):
            return self.serialize_report(o)
        if isinstance(o, (np.ndarray, np.integer, np.floating)):
            return self.serialize_value(o)

        return json.JSONEncoder.default(self, o)

def dumps(obj):
    '''Return obj as indented JSON text with a trailing newline.'''

    return json.dumps(obj, cls=GaitFusionEncoder, indent=2, allow_nan=False) + '\n'

class GaitFusionDecoder():
    '''This class decodes JSON produced by GaitFusionEncoder. Configurations are turned
    back into ExperimentConfig instances (or instances of a registered subclass); other
    objects are returned as plain dictionaries.'''

    def __init__(self):
        self.configs = {config.ExperimentConfig.__name__: config.ExperimentConfig}

    def register_config(self, config_type):
        '''Register an ExperimentConfig subclass.'''

        self.configs[config_type.__name__] = config_type

    def decode(self, string):
        '''Decode a string from JSON. If it looks like an ExperimentConfig, return an
        instance of the appropriate class.'''

        obj = json.JSONDecoder().decode(string)
        if isinstance(obj, dict) and '__ExperimentConfig__' in obj:
            return self.decode_config(obj)
        return obj

    def decode_config(self, obj):
        '''Take a dict returned from json.JSONDecoder and turn it into an ExperimentConfig
        instance. Values are assigned through the typed fields, so they are converted and
        range-checked as if they had been read from a configuration file.'''

        config_type = self.configs[obj.pop('__ExperimentConfig__')]
        result = config_type()
        for section_name, values in obj.items():
            if not isinstance(values, dict):
                raise ConfigError('Section {0} must be a JSON object'.format(section_name))
            for key, value in values.items():
                result._set(section_name + '.' + key, value)
        return result
