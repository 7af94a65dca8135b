"""Exception hierarchy shared across the package.

Every domain failure raised by this package derives from RethinklabError,
so the CLI can map "our" errors to exit code 1 and let genuine bugs crash.
"""

from __future__ import annotations


class RethinklabError(Exception):
    """Base class for all domain errors raised by this package."""


# ---------------------------------------------------------------------------
# dataset / result file I/O


class MalformedRecord(RethinklabError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DuplicateId(RethinklabError):
    def __init__(self, item_id: str):
        self.item_id = item_id
        super().__init__(f"duplicate id {item_id!r}")


class IoFailure(RethinklabError):
    """Wraps OS-level failures (unwritable dir, disk errors) with context."""


class MissingManifest(RethinklabError):
    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        super().__init__(f"no run manifest found under {run_dir}")


# ---------------------------------------------------------------------------
# backends


class BackendUnavailable(RethinklabError):
    """Network, auth, or script-exhaustion failure in a generation backend."""


class RateLimited(BackendUnavailable):
    """Provider kept returning 429 after the configured retry budget."""


class EmptyPrompt(RethinklabError):
    """generate() was called with an empty prompt."""


# ---------------------------------------------------------------------------
# prompt rendering


class EmptyOutput(RethinklabError):
    """Rethink rendering requires a nonempty model output."""


class EmptyField(RethinklabError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"required field {field!r} is empty")


class EmptyKeywords(RethinklabError):
    """Cluster prompt rendering requires at least one keyword."""


# ---------------------------------------------------------------------------
# clustering


class UnparseableReply(RethinklabError):
    """A backend reply did not contain anything the parser could use."""


class DuplicateKeyword(RethinklabError):
    def __init__(self, keyword: str):
        self.keyword = keyword
        super().__init__(f"duplicate keyword {keyword!r} in clustering input")


class MalformedOverride(RethinklabError):
    def __init__(self, line: str, reason: str = "expected 'keyword -> Category'"):
        self.line = line
        self.reason = reason
        super().__init__(f"bad override line {line!r}: {reason}")


class UncoveredRecord(RethinklabError):
    def __init__(self, item_id: str):
        self.item_id = item_id
        super().__init__(f"record {item_id!r} has no keyword covered by the category map")


# ---------------------------------------------------------------------------
# corpus


class UnresolvedItem(RethinklabError):
    def __init__(self, item_id: str):
        self.item_id = item_id
        super().__init__(f"mistake references unknown item {item_id!r}")


class PrefixCollision(RethinklabError):
    """Question or rationale text already contains a rationale prefix tag."""


# ---------------------------------------------------------------------------
# answer extraction / scoring


class NoAnswerFound(RethinklabError):
    """Text contains no candidate answer of the requested type."""


class NotNumeric(RethinklabError):
    def __init__(self, value: str):
        self.value = value
        super().__init__(f"cannot normalize {value!r} as a decimal number")


class EmptyBallot(RethinklabError):
    """majority_vote received no answers."""


class EmptyRun(RethinklabError):
    """score_run received no results."""


# ---------------------------------------------------------------------------
# configuration


class ConfigError(RethinklabError):
    """Invalid strategy / backend / CLI configuration."""
