"""Exception types shared across the package.

Every failure the library can signal is a subclass of :class:`EpiconError`,
so callers can catch one base type at pipeline boundaries while tests pin
the exact kind.
"""

from __future__ import annotations


class EpiconError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(EpiconError):
    """A domain object violates one of its structural invariants."""

    def __init__(self, kind: str, detail: str = "") -> None:
        self.kind = kind
        super().__init__(f"{kind}: {detail}" if detail else kind)


class BadArity(EpiconError):
    """Too few elements for the operation to be defined."""


class IdMismatch(EpiconError):
    """Two orderings do not range over the same identifiers."""


class EmptyGroup(EpiconError):
    """A polarity group required to be non-empty is empty."""


class IndexOutOfRange(EpiconError):
    """A 1-based sequence position falls outside the sequence."""


class BadOrder(EpiconError):
    """Positions were given in the wrong relative order (i >= j)."""


class SingleCluster(EpiconError):
    """Only one polarity is present; clustering scores are undefined."""


class GenerationParseError(EpiconError):
    """The generation response did not contain exactly two arguments."""

    def __init__(self, found_count: int, detail: str = "") -> None:
        self.found_count = found_count
        msg = f"expected 2 argument lines, found {found_count}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class RankExtractionError(EpiconError):
    """No extraction strategy recovered a valid permutation."""

    def __init__(self, strategy_log: list[str]) -> None:
        self.strategy_log = list(strategy_log)
        super().__init__("; ".join(self.strategy_log) or "no strategy succeeded")


class DuplicateIntermediate(EpiconError):
    """Two intermediates collapse to the same text after normalization."""


class BackendUnavailable(EpiconError):
    """The model backend could not produce a response."""


class ReplayMiss(EpiconError):
    """No recorded payload exists for the requested key."""


class BudgetExceeded(EpiconError):
    """The configured request-count cap has been spent."""


class UnsupportedOperation(EpiconError):
    """The backend does not implement the requested capability."""


class StoreCorrupt(EpiconError):
    """A cache/fixture store contains an unreadable record."""

    def __init__(self, path: str, line_number: int, detail: str = "") -> None:
        self.path = path
        self.line_number = line_number
        msg = f"{path}:{line_number}: unreadable record"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class EmptyScore(EpiconError):
    """A score was requested over zero tokens."""


class NonFiniteScore(EpiconError):
    """An intermediate received a NaN or infinite score."""


class InapplicableConjunction(EpiconError):
    """The conjunction places the effect before the cause, which a
    left-to-right model cannot score."""


class GenerationFailed(EpiconError):
    """A pair was dropped during the generation phase."""

    def __init__(self, pair_id: str, attempts: int, detail: str = "") -> None:
        self.pair_id = pair_id
        self.attempts = attempts
        msg = f"pair {pair_id}: generation failed after {attempts} attempt(s)"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class RankingFailed(EpiconError):
    """A pair was dropped during the ranking phase."""

    def __init__(self, pair_id: str, extraction_log: list[str]) -> None:
        self.pair_id = pair_id
        self.extraction_log = list(extraction_log)
        super().__init__(f"pair {pair_id}: " + ("; ".join(self.extraction_log) or "ranking failed"))


class ScoringFailed(EpiconError):
    """Probability scoring failed for one intermediate of a pair."""

    def __init__(self, pair_id: str, position: int, detail: str = "") -> None:
        self.pair_id = pair_id
        self.position = position
        msg = f"pair {pair_id}: scoring failed at generation position {position}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NothingScored(EpiconError):
    """Aggregation was requested but no pair produced metrics."""


class IoFailure(EpiconError):
    """A report file could not be written or read."""


class DigestMismatch(EpiconError):
    """Reports being combined come from different models or datasets."""


class LengthMismatchWarning(UserWarning):
    """Tokenizations of the same continuation differ across contexts."""
