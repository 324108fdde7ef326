"""Exception hierarchy shared by all calibration modules.

Every failure a caller can programmatically react to derives from
CalibrationError so the CLI can map them to exit code 1 uniformly.
"""


class CalibrationError(Exception):
    """Base class for all recoverable calibration failures."""


# -- geometry ----------------------------------------------------------------

class BehindCamera(CalibrationError):
    """Point has non-positive depth along the optical axis."""


class ZeroAxis(CalibrationError):
    """Rotation axis has (near-)zero norm."""


class AtInfinity(CalibrationError):
    """Projective mapping sent the point to infinity (w ~ 0)."""


class Degenerate(CalibrationError):
    """Input configuration does not constrain the model (rank loss)."""


class CollinearPoints(Degenerate):
    pass


class DegenerateViews(Degenerate):
    pass


class DegenerateMotion(Degenerate):
    pass


class DegenerateNormals(Degenerate):
    pass


# -- point clouds ------------------------------------------------------------

class ParseError(CalibrationError):
    """Malformed input file; message carries the offending line number."""


class TooFewPoints(CalibrationError):
    pass


class NoPlane(CalibrationError):
    pass


class EmptyCloud(CalibrationError):
    pass


class EmptyNonGround(CalibrationError):
    pass


class NoCorrespondences(CalibrationError):
    pass


# -- imaging -----------------------------------------------------------------

class WindowTooLarge(CalibrationError):
    pass


class BadThresholds(CalibrationError):
    pass


class NoLines(CalibrationError):
    pass


# -- board detection ---------------------------------------------------------

class NoBoard(CalibrationError):
    pass


class PartialBoard(CalibrationError):
    def __init__(self, n_found, message=None):
        self.n_found = n_found
        super().__init__(message or f"partial board: only {n_found} corners found")


class AmbiguousPattern(CalibrationError):
    pass


class NoHoles(CalibrationError):
    pass


# -- optimization / calibration ----------------------------------------------

class NoConvergence(CalibrationError):
    def __init__(self, message, best=None):
        self.best = best
        super().__init__(message)


class NoStraightSegments(CalibrationError):
    pass


class EmptyMask(CalibrationError):
    pass


class NoFeaturePoints(CalibrationError):
    pass


class EmptyFeature(CalibrationError):
    pass


class InsufficientFeatures(CalibrationError):
    pass


class LowExcitation(CalibrationError):
    pass


class IllConditioned(CalibrationError):
    pass


class VehicleStationary(CalibrationError):
    pass


class NoStaticObjects(CalibrationError):
    pass


class AboveHorizon(CalibrationError):
    pass


class ParallelLinesDoNotIntersect(CalibrationError):
    pass


class InfeasibleConstraint(CalibrationError):
    pass
