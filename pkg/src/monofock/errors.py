"""Exception types raised across the package."""


class MonofockError(Exception):
    """Base class for all package errors."""


class NonState(MonofockError):
    """A density matrix is not Hermitian, not positive, or not normalized."""


class NonPositive(MonofockError):
    """A Gram table or expectation has a negative eigenvalue beyond tolerance."""


class NotInAlgebra(MonofockError):
    """A matrix does not lie in the span of an algebra's basis."""


class InvalidAlgebra(MonofockError):
    """A basis does not span a unital *-algebra."""


class InvalidCondExp(MonofockError):
    """A map fails the conditional-expectation axioms."""


class ShapeMismatch(MonofockError):
    pass


class UnknownIndex(MonofockError):
    pass


class ContextMismatch(MonofockError):
    pass


class EmptyFamily(MonofockError):
    pass


class MixedB(MonofockError):
    """Members of a family are not modules over one common algebra."""


class DepthExceeded(MonofockError):
    """A computation reached the truncation depth of a free product space."""


class DegenerateChoice(MonofockError):
    pass


class NotInImage(MonofockError):
    """A compressed operator is not the image of any algebra element."""


class NotFullAlgebra(MonofockError):
    pass


class CompatibilityFail(MonofockError):
    pass


class AssumptionViolation(MonofockError):
    """Strict mode: the lowest index carries two different states."""


class ScenarioError(MonofockError):
    """Malformed or inconsistent scenario input."""
