from typing import Optional


class SimulationCancelledExc(Exception):
    ...


class ConfigMalformedExc(Exception):
    ...


class DimensionMismatchExc(ValueError):
    ...


class UnboundedBoxExc(ValueError):
    ...


class CornerLimitExc(ValueError):
    ...


class IntervalOrderExc(ValueError):
    ...


class StateOutsideStatespaceExc(ValueError):
    ...


class InvalidIncidenceExc(ValueError):
    ...


class EmptyTraceExc(ValueError):
    ...


class NonFiniteGradientExc(ArithmeticError):
    ...


class InfeasibleFilterExc(RuntimeError):
    ...


class EmbeddingOrderExc(ValueError):
    def __init__(self, index: int, under: float, over: float):
        super().__init__(f"Embedding state out of order at coordinate {index}: {under} > {over}")
        self.index = index


class IntegrationBlowUpExc(ArithmeticError):
    def __init__(self, message: str, prefix: Optional["object"] = None):
        super().__init__(message)
        # Trajectory holding the last finite states
        self.prefix = prefix
