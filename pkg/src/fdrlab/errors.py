"""Exception hierarchy shared by all fdrlab modules.

Each family maps onto one CLI exit status (see :mod:`fdrlab.cli`).
"""


class FdrLabError(Exception):
    """Base class for every error raised by fdrlab."""

    exit_code = 1


class ConfigError(FdrLabError):
    exit_code = 2


# -- netlist / graph ------------------------------------------------------


class NetlistError(FdrLabError):
    exit_code = 3


class SchemaError(NetlistError):
    """The netlist document does not follow the JSON schema."""


class MultiDriverError(NetlistError):
    pass


class UndrivenNetError(NetlistError):
    pass


class UnknownCellType(NetlistError):
    pass


class MissingClock(NetlistError):
    pass


class CombinationalLoopError(NetlistError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("combinational loop through: " + " -> ".join(self.cycle))


class UnknownFlipFlop(NetlistError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# -- simulation / injection -----------------------------------------------


class SimulationError(FdrLabError):
    exit_code = 4


class StimulusError(SimulationError):
    pass


class CycleOutOfRange(SimulationError):
    pass


class MissingTrace(SimulationError):
    pass


class ShapeMismatch(SimulationError):
    pass


class EmptyActiveWindow(SimulationError):
    pass


# -- models / evaluation --------------------------------------------------


class ModelError(FdrLabError):
    exit_code = 5


class EmptyDataset(ModelError):
    pass


class TooFewSamples(ModelError):
    pass


class KTooLarge(ModelError):
    pass


class NonConvergence(ModelError):
    def __init__(self, iterations, violation):
        self.iterations = iterations
        self.violation = violation
        super().__init__(
            f"SVR solver stopped after {iterations} pair updates "
            f"with KKT violation {violation:.3g}"
        )


class DimensionMismatch(ModelError):
    pass


class VersionMismatch(ModelError):
    pass


class ColumnMismatch(ModelError):
    pass


class LengthMismatch(ModelError):
    pass


class ZeroVariance(ModelError):
    pass


class NonSearchable(ModelError):
    pass
