"""Exception hierarchy; each class maps to a CLI exit code."""


class ShrinkflowError(Exception):
    exit_code = 3


class InputError(ShrinkflowError):
    exit_code = 2


class InvalidShapeError(InputError):
    pass


class GeometryError(ShrinkflowError):
    """Collision or near-coincident curves."""


class SolverError(ShrinkflowError):
    """Singular system, failed conjugacy check or similar numerical failure."""


class AccuracyError(ShrinkflowError):
    pass


class VerificationError(ShrinkflowError):
    exit_code = 4
