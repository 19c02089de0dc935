import sys
from typing import List, Optional


def error_message_detail(error, error_detail: sys):
    _, _, exc_tb = error_detail.exc_info()
    if exc_tb is None:
        return f"Error occured in python script name [unknown] line number [-] error message[{error}]"
    while exc_tb.tb_next is not None:
        exc_tb = exc_tb.tb_next
    file_name = exc_tb.tb_frame.f_code.co_filename
    error_message = "Error occured in python script name [{0}] line number [{1}] error message[{2}]".format(
        file_name, exc_tb.tb_lineno, str(error))

    return error_message


class CustomException(Exception):
    def __init__(self, error_message, error_detail: sys):
        super().__init__(error_message)
        self.error_message = error_message_detail(error_message, error_detail=error_detail)

    def __str__(self):
        return self.error_message


class FtnError(Exception):
    """Root of every error raised by the FTN library."""


# wire

class WireError(FtnError, ValueError):
    pass


class EncodingError(WireError):
    pass


class TruncatedFrameError(WireError):
    pass


class OversizeFrameError(WireError):
    pass


class MalformedControlError(WireError):
    pass


# topology

class TopologyError(FtnError):
    pass


class UnknownNodeError(TopologyError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown node"


class NoRouteError(TopologyError):
    pass


class AmbiguousRouteError(TopologyError):
    pass


class NotAdjacentError(TopologyError):
    pass


# traffic / metrics

class TrafficDomainError(FtnError, ValueError):
    def __init__(self, parameter: str, message: str):
        super().__init__(f"{parameter}: {message}")
        self.parameter = parameter
        self.message = message


class ScheduleOverlapError(TrafficDomainError):
    def __init__(self, message: str):
        super().__init__("schedule", message)


class MetricsDomainError(FtnError, ValueError):
    pass


# scenarios

class ScenarioValidationError(FtnError, ValueError):
    def __init__(self, violations: List[str], source: Optional[str] = None):
        self.violations = list(violations)
        self.source = source
        head = f"invalid scenario {source}" if source else "invalid scenario"
        super().__init__(head + ":\n" + "\n".join(f"  - {v}" for v in self.violations))
