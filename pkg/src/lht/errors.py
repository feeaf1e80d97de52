"""Exception types shared across the package."""


class LhtError(Exception):
    """Base class for all package-specific errors."""


# -- hierarchy ---------------------------------------------------------------

class HierarchyError(LhtError):
    """A label hierarchy violates one of its structural invariants."""


class OrphanClass(HierarchyError):
    """A class is missing a parent assignment at the next coarser level."""


class ChildlessParent(HierarchyError):
    """A class at a coarse level has no children at the finer level."""


class NonDecreasingSizes(HierarchyError):
    """Class counts do not strictly decrease toward the coarse end."""


class IndexOutOfRange(HierarchyError):
    """A class or label index falls outside its level's range."""


class InvalidLevel(HierarchyError):
    """A level number is outside the hierarchy's valid range."""


# -- numerics ----------------------------------------------------------------

class ShapeMismatch(LhtError):
    """Operands have incompatible shapes."""


class NumericalError(LhtError):
    """A primitive produced or received non-finite values."""


class NotOnSimplex(LhtError):
    """A vector expected to be a probability distribution is not."""


class NotOneHot(LhtError):
    """A vector expected to be one-hot is not."""


# -- model -------------------------------------------------------------------

class ModeMismatch(LhtError):
    """An operation was called on a model in the wrong mode."""


class CheckpointError(LhtError):
    """A checkpoint file is malformed or incompatible."""


# -- losses / training -------------------------------------------------------

class NegativeLambda(LhtError):
    """The confusion-loss weight must be non-negative."""


class StepOutOfRange(LhtError):
    """A schedule was queried outside [0, max_steps]."""


# -- data --------------------------------------------------------------------

class InvalidScales(LhtError):
    """Center scales must strictly increase from finest to coarsest."""


class ParseError(LhtError):
    """A dataset file could not be parsed."""


class InconsistentChain(LhtError):
    """A label chain disagrees with the hierarchy's parent maps."""


class DimensionMismatch(LhtError):
    """Feature or label dimensions disagree with expectations."""


# -- evaluation --------------------------------------------------------------

class HierarchyMismatch(LhtError):
    """Two artifacts were built against different hierarchies."""


# -- verification ------------------------------------------------------------

class NotConverged(LhtError):
    """A training-based check did not reach its thresholds."""
