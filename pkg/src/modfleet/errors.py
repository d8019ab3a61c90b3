"""Exception types shared across the package."""


class ModfleetError(Exception):
    """Base class for all errors raised by this package."""


class MalformedFile(ModfleetError):
    """An input file violates its schema. Carries the offending row number."""

    def __init__(self, path, row, reason):
        self.path = str(path)
        self.row = row
        self.reason = reason
        super().__init__(f"{self.path}, row {row}: {reason}")


class DanglingEdge(ModfleetError):
    """An edge references a node id that is not in the node table."""


class Unreachable(ModfleetError):
    """No directed path exists between the queried nodes."""


class NotEnoughPoints(ModfleetError):
    """Fewer distinct demand points than requested clusters."""


class UnknownEdge(ModfleetError):
    """An occupancy log references an edge absent from the network."""


class WindowMismatch(ModfleetError):
    """Two logs or density tables use incompatible time windows."""
