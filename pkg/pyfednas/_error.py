#
# Copyright (C) 2019-2020  pyfednas contributors
# This software is distributed under the terms of the MIT License.
#

import typing


class SimulationError(Exception):
    """
    Base class for every error raised by the simulator's inner logic. The public entry points may also raise
    ValueError when invoked with arguments that violate their documented preconditions.
    Fields:
        path    Config or data file where the error originates. Optional, None if unknown or irrelevant.
        line    Line number in that file. Optional; the path is always known if the line number is set.
    """

    def __init__(self,
                 text: str,
                 path: typing.Optional[str] = None,
                 line: typing.Optional[int] = None):
        Exception.__init__(self, text)
        self._path = path
        self._line = line

    def set_error_location_if_unknown(self,
                                      path: typing.Optional[str] = None,
                                      line: typing.Optional[int] = None) -> None:
        """
        Entries that are already known are left unchanged. Used when an error raised deep inside validation
        propagates up to the layer that knows which file is being processed.
        """
        if not self._path and path:
            self._path = path

        if not self._line and line:
            self._line = line

    @property
    def path(self) -> typing.Optional[str]:
        return self._path

    @property
    def line(self) -> typing.Optional[int]:
        return self._line

    @property
    def text(self) -> str:
        return Exception.__str__(self)

    def __str__(self) -> str:
        """GCC-like format, so that editors can jump to the offending config line."""
        if self.path and self.line:
            return '%s:%d: %s' % (self.path, self.line, self.text)

        if self.path:
            return '%s: %s' % (self.path, self.text)

        return self.text

    def __repr__(self) -> str:
        return self.__class__.__name__ + ': ' + repr(self.__str__())


class InternalError(SimulationError):
    """
    A bug in the simulator itself rather than a problem with the experiment.
    """
    def __init__(self,
                 text: typing.Optional[str] = None,
                 path: typing.Optional[str] = None,
                 line: typing.Optional[int] = None,
                 culprit: typing.Optional[Exception] = None):
        if culprit is not None:
            report_text = 'This is a bug in the simulator; please report it with the error: ' + repr(culprit)
            if text:
                text = text + ' ' + report_text
            else:   # pragma: no cover
                text = report_text

        if not text:
            text = ''

        super(InternalError, self).__init__(text=text, path=path, line=line)


class InvalidConfigError(SimulationError):
    """
    A mistake in the experiment configuration: syntax, unknown names, or violated cross-field constraints.
    """
    pass


class ContractViolationError(SimulationError):
    """
    A tensor or parameter set does not match the shape contract declared by an operator.
    """
    pass


class NonFiniteGradientError(ContractViolationError):
    pass


class SearchSpaceError(InvalidConfigError):
    """
    The search space definition is inconsistent: too few candidates, shape-incompatible or misplaced operators.
    """
    pass


class BudgetInfeasibleError(SimulationError):
    """
    A communication or compute budget cannot be satisfied by any selection.
    """
    pass


class DegenerateSpaceError(SimulationError):
    pass


class PartitionError(SimulationError):
    pass


class AggregationError(SimulationError):
    pass


class RoundAbortedError(SimulationError):
    pass


class EligibilityError(SimulationError):
    pass


class RankingError(SimulationError):
    pass


def _unittest_error() -> None:
    try:
        raise SimulationError('Hello world!')
    except Exception as ex:
        assert str(ex) == 'Hello world!'
        assert repr(ex) == "SimulationError: 'Hello world!'"

    try:
        raise InvalidConfigError('supernet.rounds: must be non-negative', path='desk.ini', line=12)
    except SimulationError as ex:
        assert str(ex) == 'desk.ini:12: supernet.rounds: must be non-negative'
        assert repr(ex) == "InvalidConfigError: 'desk.ini:12: supernet.rounds: must be non-negative'"

    try:
        raise InvalidConfigError('Bad', path='desk.ini')
    except SimulationError as ex:
        assert str(ex) == 'desk.ini: Bad'

    assert issubclass(NonFiniteGradientError, ContractViolationError)


def _unittest_internal_error_reporting() -> None:
    try:
        raise InternalError(path='FILE_PATH', line=42)
    except SimulationError as ex:
        assert ex.path == 'FILE_PATH'
        assert ex.line == 42
        assert str(ex) == 'FILE_PATH:42: '

    try:
        try:
            try:
                raise InternalError(text='BASE TEXT', culprit=Exception('ERROR TEXT'))
            except SimulationError as ex:
                ex.set_error_location_if_unknown(path='FILE_PATH')
                raise
        except SimulationError as ex:
            ex.set_error_location_if_unknown(line=42, path='OTHER_PATH')
            raise
    except SimulationError as ex:
        assert ex.path == 'FILE_PATH'
        assert ex.line == 42
        assert str(ex).startswith(
            "FILE_PATH:42: BASE TEXT This is a bug in the simulator; please report it with the error: "
            "Exception('ERROR TEXT')"
        )
