#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import os
import typing
import logging
import functools
import parsimonious
from parsimonious.nodes import Node as _Node
from ._error import SimulationError, InvalidConfigError, InternalError


class ConfigSyntaxError(InvalidConfigError):
    pass


# Integers, reals, booleans, strings, or (possibly nested) lists of those.
Value = typing.Any


class Assignment(typing.NamedTuple):
    section: str
    key: str
    value: Value
    line: int


def parse(text: str, path: typing.Optional[str] = None) -> typing.List[Assignment]:
    """
    Parses an experiment configuration file into the list of its assignments in the order of appearance.
    Only the syntax and the placement of the assignments are checked here.

    >>> parse('[run]\\nseed = 42  # comment\\n')
    [Assignment(section='run', key='seed', value=42, line=2)]
    """
    pr = _ParseTreeProcessor()
    try:
        pr.parse(text)  # type: ignore

    except SimulationError as ex:
        ex.set_error_location_if_unknown(path=path, line=pr.current_line_number)
        raise ex

    except parsimonious.ParseError as ex:
        raise ConfigSyntaxError('Syntax error', path=path, line=int(ex.line())) from None  # type: ignore

    except parsimonious.VisitationError as ex:  # pragma: no cover
        raise InternalError(str(ex), path=path, line=pr.current_line_number)

    return pr.assignments


_logger = logging.getLogger(__name__)


_Children = typing.Tuple[typing.Any, ...]
_VisitorHandler = typing.Callable[['_ParseTreeProcessor', _Node, _Children], typing.Any]


def _logged_transformation(fun: _VisitorHandler) -> _VisitorHandler:
    @functools.wraps(fun)
    def wrapper(self: '_ParseTreeProcessor', node: _Node, children: _Children) -> typing.Any:
        result = '<TRANSFORMATION FAILED>'  # type: typing.Any
        try:
            result = fun(self, node, children)
            return result
        finally:
            _logger.debug('Transformation: %s --> %r (source text: %r)', node.expr_name, result, node.text)

    return wrapper


# noinspection PyMethodMayBeStatic
class _ParseTreeProcessor(parsimonious.NodeVisitor):
    with open(os.path.join(os.path.dirname(__file__), 'grammar.parsimonious')) as _grammar_file:
        grammar = parsimonious.Grammar(_grammar_file.read())  # type: ignore

    unwrapped_exceptions = SimulationError,  # type: ignore

    def __init__(self) -> None:
        self._current_line_number = 1   # Lines are numbered from one
        self._section = None    # type: typing.Optional[str]
        self._assignments = []  # type: typing.List[Assignment]

    @property
    def current_line_number(self) -> int:
        assert self._current_line_number > 0
        return self._current_line_number

    @property
    def assignments(self) -> typing.List[Assignment]:
        return list(self._assignments)

    def generic_visit(self, node: _Node, children: typing.Sequence[typing.Any]) -> typing.Any:
        """If the node has children, replace the node with them."""
        return tuple(children) or node

    def visit_end_of_line(self, _n: _Node, _c: _Children) -> None:
        self._current_line_number += 1

    # ================================================== Statements ==================================================

    def visit_section(self, _n: _Node, children: _Children) -> None:
        _bl, _s0, name, _s1, _br = children
        assert isinstance(name, str) and name
        self._section = name

    @_logged_transformation
    def visit_assignment(self, _n: _Node, children: _Children) -> Assignment:
        key, _s0, _eq, _s1, value = children
        assert isinstance(key, str) and key
        if self._section is None:
            raise InvalidConfigError('Key %r appears outside of any section' % key)
        for a in self._assignments:
            if (a.section, a.key) == (self._section, key):
                raise InvalidConfigError('Duplicate key %s.%s, first assigned on line %d' % (a.section, key, a.line))
        out = Assignment(self._section, key, value, self.current_line_number)
        self._assignments.append(out)
        return out

    def visit_identifier(self, node: _Node, _c: _Children) -> str:
        assert isinstance(node.text, str) and node.text
        return node.text

    # ================================================== Values ==================================================

    visit_value   = parsimonious.NodeVisitor.lift_child
    visit_literal = parsimonious.NodeVisitor.lift_child
    visit_boolean = parsimonious.NodeVisitor.lift_child

    def visit_list(self, _n: _Node, children: _Children) -> typing.List[Value]:
        _bl, _s0, body, _s1, _br = children
        if isinstance(body, _Node):     # Empty list
            return []
        items, = body
        assert isinstance(items, list)
        return items

    def visit_list_body(self, _n: _Node, children: _Children) -> typing.List[Value]:
        head, tail, _comma = children
        return [head] + (list(tail) if isinstance(tail, tuple) else [])

    def visit_list_tail(self, _n: _Node, children: _Children) -> Value:
        _s0, _comma, _s1, value = children
        return value

    def visit_real(self, node: _Node, _c: _Children) -> float:
        return float(node.text)

    def visit_integer(self, node: _Node, _c: _Children) -> int:
        return int(node.text)

    def visit_boolean_true(self, _n: _Node, _c: _Children) -> bool:
        return True

    def visit_boolean_false(self, _n: _Node, _c: _Children) -> bool:
        return False

    def visit_string(self, node: _Node, _c: _Children) -> str:
        assert node.text[0] == node.text[-1] == '"'
        return str(node.text[1:-1])


def _unittest_parse() -> None:
    from pytest import raises

    text = '\n'.join([
        '# An experiment',
        '[space]',
        'candidates = [["conv1x1", "conv3x3"], ["identity"],]',
        'channel_growth = 1.5e0',
        '',
        '[tiers]   # section comment',
        '  fractions = [0.25, .25, 2.5e-1, 0.25]',
        'rho_low = 0',
        'empty = []',
        '[run]',
        'verbose = true',
        'quiet=false',
        'name = "a b # c"',
    ])
    assert parse(text) == [
        Assignment('space', 'candidates', [['conv1x1', 'conv3x3'], ['identity']], 3),
        Assignment('space', 'channel_growth', 1.5, 4),
        Assignment('tiers', 'fractions', [0.25, 0.25, 0.25, 0.25], 7),
        Assignment('tiers', 'rho_low', 0, 8),
        Assignment('tiers', 'empty', [], 9),
        Assignment('run', 'verbose', True, 11),
        Assignment('run', 'quiet', False, 12),
        Assignment('run', 'name', 'a b # c', 13),
    ]
    assert isinstance(parse('[a]\nx = -3')[0].value, int)
    assert parse('') == []

    with raises(ConfigSyntaxError) as ex_info:
        parse('[run]\nseed = 1\nseed 2\n', path='exp.ini')
    assert ex_info.value.line == 3
    assert str(ex_info.value) == 'exp.ini:3: Syntax error'

    with raises(ConfigSyntaxError):
        parse('[run]\nname = "unterminated\n')

    with raises(InvalidConfigError, match=r'.*outside of any section.*') as ex_info:
        parse('\nseed = 1\n', path='exp.ini')
    assert ex_info.value.line == 2 and ex_info.value.path == 'exp.ini'

    with raises(InvalidConfigError, match=r'.*Duplicate key run.seed.*line 2.*') as ex_info:
        parse('[run]\nseed = 1\n[run]\nseed = 2\n')
    assert ex_info.value.line == 4
