"""Exception hierarchy for the geometry core and the scenario runner.

Every error derives from ValueError so callers written against the
validation layer (which raises ValueError) keep catching them. Messages are
prefixed with the class name so run logs stay greppable.
"""

from __future__ import annotations


class BundleLabError(ValueError):
    """Base class for all bundlelab errors."""

    def __init__(self, message: str):
        super().__init__(f"{type(self).__name__}: {message}")


class ResidualError(BundleLabError):
    """An identity failed numerically. Carries the check name and residual."""

    def __init__(self, check: str, residual: float, tolerance: float | None = None):
        self.check = check
        self.residual = float(residual)
        self.tolerance = tolerance
        if tolerance is None:
            super().__init__(f"{check} residual {residual:.3e}")
        else:
            super().__init__(f"{check} residual {residual:.3e} exceeds {tolerance:.1e}")


# ---------------------------------------------------------------------------
# numerics / clifford / group
# ---------------------------------------------------------------------------

class NotHermitian(ResidualError):
    pass


class DimensionMismatch(BundleLabError):
    pass


class NotPositiveDefinite(BundleLabError):
    pass


class UnknownIrrep(BundleLabError):
    pass


class UnlabelledSpace(BundleLabError):
    pass


class TruncationExceeded(BundleLabError):
    pass


# ---------------------------------------------------------------------------
# weil / triple
# ---------------------------------------------------------------------------

class RelationViolated(ResidualError):
    pass


class MissingVerticalGeometry(BundleLabError):
    pass


class InvalidRemainder(ResidualError):
    pass


class NotFactorisable(ResidualError):
    pass


# ---------------------------------------------------------------------------
# crossprod
# ---------------------------------------------------------------------------

class ActionNotCocycle(ResidualError):
    pass


class CocycleViolation(ResidualError):
    pass


class NotCommutant(ResidualError):
    pass


class NotUnitary(ResidualError):
    pass


class NotAFrame(ResidualError):
    pass


class ExpectationNotBimodular(ResidualError):
    pass


# ---------------------------------------------------------------------------
# deform
# ---------------------------------------------------------------------------

class ShapeMismatch(BundleLabError):
    pass


class WeightMetadataMissing(BundleLabError):
    pass


class NotInvariant(ResidualError):
    pass


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

class ConfigParse(BundleLabError):
    pass


class ScenarioBuild(BundleLabError):
    """Wraps a core error raised while building a scenario."""

    def __init__(self, scenario: str, cause: Exception):
        self.scenario = scenario
        self.cause = cause
        super().__init__(f"scenario '{scenario}': {cause}")


class CheckFailure(BundleLabError):
    pass
