"""
Module for defining the schema of checker verdicts.
"""

from bdso_simulator.core.compat import StrEnum

from pydantic import BaseModel


class Outcome(StrEnum):
    """
    Enumeration for the outcome of checking a property.
    """

    PASS = "PASS"
    FAIL = "FAIL"
    # The property does not apply to the history e.g. sequential equivalence of a concurrent run
    SKIP = "SKIP"


class Verdict(BaseModel):
    """
    Schema model for the verdict of one property on one history.
    """

    property: str
    verdict: Outcome
    witness: list[str] = []

    @property
    def failed(self) -> bool:
        """Whether the property was violated."""
        return self.verdict == Outcome.FAIL
