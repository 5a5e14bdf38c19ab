'''This module defines ConfigField and subclasses - the class hierarchy that defines the
typed values held in the sections of an experiment configuration, and how they are
converted from the text found in configuration files.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import os
import re

RANGE_REGEXP = re.compile(r"(\d+)\s*-\s*(\d+)")

class ConfigField:
    '''ConfigField is an abstract class that forms the root of a hierarchy that defines
    typed configuration values. Instances are descriptors that store their value in a
    slot on the owning ConfigSection. Values of the wrong type are passed to convert, and
    values outside the minimum/maximum range are rejected with ValueError.'''

    def __init__(self, py_type=None, default=None, nullable=False, minimum=None,
                 maximum=None, exclusive_minimum=False, doc=''):
        self.py_type = py_type
        self.default = default
        self.nullable = nullable
        self.minimum = minimum
        self.maximum = maximum
        self.exclusive_minimum = exclusive_minimum
        self.doc = doc
        self.name = None
        self.slot_name = None

    def __set_name__(self, owner, name):
        self.name = name
        self.slot_name = '_' + name

    def __set__(self, instance, value):
        if value is None:
            if self.nullable:
                instance.__setattr__(self.slot_name, None)
                return
            raise TypeError('''Field '{0}' can not be null.'''.format(self.name))

        if self.py_type is not None and isinstance(value, self.py_type) \
                and not isinstance(value, (str, bool)):
            converted = value
        else:
            try:
                converted = self.convert(value)
            except (TypeError, KeyError) as te_raised:
                raise TypeError('''Field '{0}' cannot be set to value '{1}' of type '{2}'.'''
                                .format(self.name, str(value), str(type(value)))) \
                                from te_raised
        self.check_range(converted)
        instance.__setattr__(self.slot_name, converted)

    def __get__(self, instance, owner):
        if instance is not None:
            return instance.__getattribute__(self.slot_name)
        return self

    def __str__(self):
        return '{0} ({1})'.format(self.__class__.__name__, self.name)

    def convert(self, value):
        '''The convert method is called if __set__ is passed a value that is not of the
        type (if any) passed into the constructor under the py_type parameter, or is a
        string. Subclasses should attempt to convert the value to the appropriate type,
        and if they cannot they should raise TypeError (or ValueError for a string that
        is syntactically invalid).'''

        raise TypeError

    def check_range(self, value):
        '''Raise ValueError if value falls outside the minimum and maximum set for the
        field.'''

        if self.minimum is not None:
            if value < self.minimum or (self.exclusive_minimum and value == self.minimum):
                raise ValueError('''Field '{0}' must be {1} {2}, not {3}.'''
                                 .format(self.name,
                                         'greater than' if self.exclusive_minimum
                                         else 'at least',
                                         self.minimum, value))
        if self.maximum is not None and value > self.maximum:
            raise ValueError('''Field '{0}' must be at most {1}, not {2}.'''
                             .format(self.name, self.maximum, value))

    def format_value(self, value):
        '''Return the text form of value as it would be written in a configuration
        file.'''

        return str(value)

class IntField(ConfigField):
    '''Represents an integer value.'''

    def __init__(self, **kwargs):
        super().__init__(py_type=int, **kwargs)

    def convert(self, value):
        if isinstance(value, bool):
            raise TypeError
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            return int(value.strip())
        raise TypeError

class RealField(ConfigField):
    '''Represents a real value, stored as a Python float.'''

    def __init__(self, **kwargs):
        super().__init__(py_type=float, **kwargs)

    def convert(self, value):
        if isinstance(value, bool):
            raise TypeError
        if isinstance(value, int):
            return float(value)
        if isinstance(value, str):
            return float(value.strip())
        raise TypeError

    def format_value(self, value):
        return repr(value)

class BooleanField(ConfigField):
    '''Represents a flag. Strings are accepted in the forms understood by configparser
    (yes/no, true/false, on/off, 1/0).'''

    TRUE_STRINGS = frozenset(('1', 'yes', 'true', 'on'))
    FALSE_STRINGS = frozenset(('0', 'no', 'false', 'off'))

    def __init__(self, **kwargs):
        super().__init__(py_type=bool, **kwargs)

    def convert(self, value):
        if isinstance(value, str):
            text = value.strip().lower()
            if text in self.TRUE_STRINGS:
                return True
            if text in self.FALSE_STRINGS:
                return False
            raise ValueError('''Field '{0}' expects a boolean, not '{1}'.'''
                             .format(self.name, value))
        if isinstance(value, int):
            return bool(value)
        raise TypeError

    def format_value(self, value):
        return 'true' if value else 'false'

class TextField(ConfigField):
    '''Represents a text value. Surrounding whitespace is removed from strings.'''

    def __init__(self, **kwargs):
        super().__init__(py_type=None, **kwargs)

    def convert(self, value):
        if isinstance(value, str):
            return value.strip()
        raise TypeError

class ChoiceField(ConfigField):
    '''Represents a member of an enum.Enum type. Strings are matched case-insensitively
    against the member names.'''

    def __init__(self, enum_type, **kwargs):
        super().__init__(py_type=enum_type, **kwargs)
        self.enum_type = enum_type

    def convert(self, value):
        if isinstance(value, str):
            return self.enum_type[value.strip().upper()]
        if isinstance(value, int):
            return self.enum_type(value)
        raise TypeError

    def format_value(self, value):
        return value.name.lower()

class IntListField(ConfigField):
    '''Represents a tuple of integers. In text form the integers are comma-separated and
    inclusive ranges may be written as 'first-last', so '0-2, 5' is (0, 1, 2, 5).
    minimum and maximum apply to every element.'''

    def __init__(self, **kwargs):
        super().__init__(py_type=None, **kwargs)

    def convert(self, value):
        if isinstance(value, str):
            result = []
            for part in value.split(','):
                part = part.strip()
                if not part:
                    continue
                span = RANGE_REGEXP.fullmatch(part)
                if span:
                    result.extend(range(int(span[1]), int(span[2]) + 1))
                else:
                    result.append(int(part))
            return tuple(result)
        if isinstance(value, (list, tuple)):
            if not all(isinstance(i, int) and not isinstance(i, bool) for i in value):
                raise TypeError
            return tuple(value)
        raise TypeError

    def check_range(self, value):
        for i in value:
            super().check_range(i)

    def format_value(self, value):
        return ', '.join(str(i) for i in value)

class TextListField(ConfigField):
    '''Represents a tuple of strings, comma-separated in text form.'''

    def __init__(self, **kwargs):
        super().__init__(py_type=None, **kwargs)

    def convert(self, value):
        if isinstance(value, str):
            return tuple(part.strip() for part in value.split(',') if part.strip())
        if isinstance(value, (list, tuple)):
            if not all(isinstance(i, str) for i in value):
                raise TypeError
            return tuple(value)
        raise TypeError

    def format_value(self, value):
        return ', '.join(value)

class PathField(TextField):
    '''Represents a filesystem path. Relative paths are resolved against the base
    directory supplied when a configuration is validated, and must_exist requests that the
    path be checked at that point.'''

    def __init__(self, must_exist=True, **kwargs):
        super().__init__(**kwargs)
        self.must_exist = must_exist

    def resolve(self, value, base_dir):
        '''Return value as a path relative to base_dir (if it is not absolute).'''

        if value is None or base_dir is None or os.path.isabs(value):
            return value
        return os.path.normpath(os.path.join(base_dir, value))
