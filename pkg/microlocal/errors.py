"""
Workbench Exceptions
Every failure raised by the workbench, each with a JSON-friendly witness
"""

from typing import Any, Dict, Optional


class WorkbenchError(Exception):
    """Base class for all workbench failures.

    ``kind`` is "violation" for a mathematical failure found in valid input
    and "input" for malformed input; the CLI maps these to exit codes 1 and 2.
    """

    kind = "input"

    def __init__(self, message: str, witness: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.witness = dict(witness or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "witness": self.witness,
        }


class MathematicalViolation(WorkbenchError):
    kind = "violation"


# exact-kernel
class ShapeMismatch(WorkbenchError):
    pass


class Singular(MathematicalViolation):
    pass


class NotSymmetric(WorkbenchError):
    pass


# symplectic-maslov
class FrameMismatch(WorkbenchError):
    pass


class DegenerateStep(MathematicalViolation):
    pass


class StratumViolation(MathematicalViolation):
    pass


# quiver-core
class NotInvertible(MathematicalViolation):
    def __init__(self, index: int, message: Optional[str] = None):
        super().__init__(message or f"1 + m_{{{index}{index}}} is not invertible", {"index": index})
        self.index = index


class PointCountMismatch(WorkbenchError):
    pass


class CompositionMismatch(WorkbenchError):
    pass


# equivariant
class KernelEvaluationError(MathematicalViolation):
    pass


class Diagram4Violation(MathematicalViolation):
    def __init__(self, i: int, j: int, generator: str):
        super().__init__(
            f"gamma does not intertwine m_{{{j}{i}}} under generator {generator}",
            {"i": i, "j": j, "generator": generator},
        )


class RelationViolation(MathematicalViolation):
    def __init__(self, word: str, index: Optional[int] = None, reason: str = "gamma transport"):
        witness: Dict[str, Any] = {"word": word, "reason": reason}
        if index is not None:
            witness["index"] = index
        super().__init__(f"relation {word} is not the identity ({reason})", witness)


class PresentationMismatch(WorkbenchError):
    pass


# fiber-product
class CategoryMismatch(WorkbenchError):
    pass


class LiftVerificationFailed(MathematicalViolation):
    pass


class NotAnEquivalence(MathematicalViolation):
    pass


# melded-systems
class GammaViolation(MathematicalViolation):
    pass


class ModelMismatch(WorkbenchError):
    pass


class UnknownGenerator(WorkbenchError):
    pass


# stack-site
class SiteError(WorkbenchError):
    pass


class CocycleViolation(MathematicalViolation):
    def __init__(self, i: int, j: int, k: int):
        super().__init__(f"cocycle condition fails on U_{i} ∩ U_{j} ∩ U_{k}", {"i": i, "j": j, "k": k})


class InverseViolation(MathematicalViolation):
    def __init__(self, i: int, j: int):
        super().__init__(f"sigma_{j}{i} is not the inverse of sigma_{i}{j}", {"i": i, "j": j})


class DescentInvalid(MathematicalViolation):
    pass


class GluingUnsupported(WorkbenchError):
    pass


class IncoherentMorphism(MathematicalViolation):
    pass


class CoherenceViolation(MathematicalViolation):
    pass


class NotOpenMap(WorkbenchError):
    pass


# workbench-cli
class UnknownSuite(WorkbenchError):
    pass


class ParseError(WorkbenchError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}", {"location": location})
        self.location = location
