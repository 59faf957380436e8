"""Exception hierarchy shared by all modules."""


class ErgoError(ValueError):
    """Base class; ``stage`` tags where in a pipeline the failure happened."""

    stage = "general"

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class DimensionError(ErgoError):
    stage = "lattice"


class ValidityError(ErgoError):
    stage = "lattice"


class MoveError(ErgoError):
    stage = "lattice"


class CircuitError(ErgoError):
    stage = "gates"


class CompileError(ErgoError):
    stage = "gates"


class SizeGuardError(ErgoError):
    stage = "dynamics"


class SpectralError(ErgoError):
    stage = "dynamics"


class ReadoutError(ErgoError):
    stage = "readout"
