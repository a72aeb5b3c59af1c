"""
Errors reported by the command line. Each carries the process exit code and a machine-readable category
written to ``diagnostics.json``.
"""
import math
from typing import Any, Dict, List, Optional


EXIT_OK = 0
EXIT_RUNTIME_FAILURE = 1
EXIT_USAGE_ERROR = 2
EXIT_VALIDATION_FAILURE = 3


class GreenDcError(Exception):
    exit_code = EXIT_RUNTIME_FAILURE
    category = 'runtime'

    def as_dict(self) -> Dict[str, Any]:
        return {'category': self.category, 'message': str(self), 'exit_code': self.exit_code}


class UsageError(GreenDcError):
    """Invalid command line"""
    exit_code = EXIT_USAGE_ERROR
    category = 'usage'


class ConfigError(GreenDcError):
    """
    Invalid configuration file

    Args:
        message: what is wrong
        path: the configuration file
        field: dotted path of the failing field, if known
        line: line of a parse error, if known
        column: column of a parse error, if known
    """
    exit_code = EXIT_USAGE_ERROR
    category = 'config'

    def __init__(self, message: str, path: Optional[str] = None, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.field = field
        self.line = line
        self.column = column

        location = path or '<config>'
        if line is not None:
            location += f':{line}'
            if column is not None:
                location += f':{column}'
        if field is not None:
            message = f'{field}: {message}'
        super().__init__(f'{location}: {message}')

    def as_dict(self) -> Dict[str, Any]:
        d = super().as_dict()
        d.update({'path': self.path, 'field': self.field, 'line': self.line, 'column': self.column})
        return d


class TraceError(GreenDcError):
    """
    Invalid trace file

    Args:
        message: what is wrong
        path: the trace file
        row: 1-based line of the file (the header is line 1), if known
        column: name of the failing column, if known
    """
    exit_code = EXIT_USAGE_ERROR
    category = 'trace'

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None,
                 column: Optional[str] = None):
        self.path = path
        self.row = row
        self.column = column

        location = path or '<trace>'
        if row is not None:
            location += f': row {row}'
        if column is not None:
            location += f', column `{column}`'
        super().__init__(f'{location}: {message}')

    def as_dict(self) -> Dict[str, Any]:
        d = super().as_dict()
        d.update({'path': self.path, 'row': self.row, 'column': self.column})
        return d


class ValidationFailure(GreenDcError):
    """
    An oracle or the audit did not pass

    Args:
        message: what failed
        checks: records of the failed checks, embedded in the diagnostics
    """
    exit_code = EXIT_VALIDATION_FAILURE
    category = 'validation'

    def __init__(self, message: str, checks: Optional[List[Dict[str, Any]]] = None):
        self.checks = checks or []
        super().__init__(message)

    def as_dict(self) -> Dict[str, Any]:
        d = super().as_dict()
        # non-finite values are not valid JSON
        d['checks'] = [{k: None if isinstance(v, float) and not math.isfinite(v) else v for k, v in c.items()}
                       for c in self.checks]
        return d
