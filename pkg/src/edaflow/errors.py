"""Exception types shared across the flow.

Every error carries enough structured data for the HTTP layer to turn it
into a JSON body and for the HTTP client to turn it back into the same type.
"""


class EdaFlowError(Exception):
    """Base class. ``kind`` is the stable wire name of the error."""

    kind = "EdaFlowError"

    def to_dict(self):
        return {"type": self.kind, "detail": str(self)}


# -- templates ---------------------------------------------------------------

class TemplateError(EdaFlowError):
    kind = "TemplateError"


class MissingRequiredPlaceholder(TemplateError):
    kind = "MissingRequiredPlaceholder"

    def __init__(self, missing):
        self.missing = frozenset(missing)
        super().__init__("missing required placeholders: " + ", ".join(sorted(self.missing)))


class UnresolvedPlaceholder(TemplateError):
    kind = "UnresolvedPlaceholder"

    def __init__(self, names, msg=None):
        self.names = frozenset(names)
        super().__init__(msg or "unresolved placeholders: " + ", ".join(sorted(self.names)))


class DepthExceeded(UnresolvedPlaceholder):
    kind = "DepthExceeded"

    def __init__(self, names, depth):
        self.depth = depth
        super().__init__(
            names, f"placeholder expansion exceeded depth {depth}: " + ", ".join(sorted(names))
        )


# -- services ----------------------------------------------------------------

class InvalidRequest(EdaFlowError):
    kind = "InvalidRequest"

    def __init__(self, problems):
        # problems: list of (field, message)
        self.problems = [(str(f), str(m)) for f, m in problems]
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.problems))

    @property
    def fields(self):
        return [f for f, _ in self.problems]

    def to_dict(self):
        d = super().to_dict()
        d["fields"] = self.fields
        d["problems"] = [list(p) for p in self.problems]
        return d


class WorkspaceConflict(EdaFlowError):
    kind = "WorkspaceConflict"


class MissingUpstream(EdaFlowError):
    kind = "MissingUpstream"


class NegativeIndex(EdaFlowError, ValueError):
    kind = "NegativeIndex"


class ExecutorFailure(EdaFlowError):
    """A stage ran but the backend reported failure. ``response`` is the
    error-status stage response (rendered script, log excerpt)."""

    kind = "ExecutorFailure"

    def __init__(self, msg, response=None):
        super().__init__(msg)
        self.response = response

    def to_dict(self):
        d = super().to_dict()
        if self.response is not None:
            d["response"] = self.response.model_dump()
        return d


# -- executor ----------------------------------------------------------------

class ExecutorError(EdaFlowError):
    kind = "ExecutorError"


class BackendUnavailable(ExecutorError):
    kind = "BackendUnavailable"


class ExecutionTimeout(ExecutorError):
    kind = "Timeout"


class WorkspaceMissing(ExecutorError):
    kind = "WorkspaceMissing"


class NoMatches(ExecutorError):
    kind = "NoMatches"


class ArchiveWriteFailed(ExecutorError):
    kind = "ArchiveWriteFailed"


# -- agent -------------------------------------------------------------------

class EmptyPrompt(EdaFlowError, ValueError):
    kind = "EmptyPrompt"


class ModelClientUnavailable(EdaFlowError):
    kind = "ModelClientUnavailable"


class NoStageDetected(EdaFlowError):
    kind = "NoStageDetected"


class PlanConflict(EdaFlowError):
    kind = "PlanConflict"

    def __init__(self, conflicts):
        self.conflicts = list(conflicts)
        super().__init__("; ".join(c.describe() for c in self.conflicts))

    def to_dict(self):
        d = super().to_dict()
        d["conflicts"] = [c.to_dict() for c in self.conflicts]
        return d


class StageFailed(EdaFlowError):
    """Carries the partial agent response; its last result is the failing stage."""

    kind = "StageFailed"

    def __init__(self, stage, response, cause=None):
        self.stage = stage
        self.response = response
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")

    def to_dict(self):
        d = super().to_dict()
        d["stage"] = self.stage
        d["response"] = self.response.to_dict()
        return d


class SessionUnknown(EdaFlowError, KeyError):
    kind = "SessionUnknown"

    def __str__(self):
        return Exception.__str__(self)


# -- benchmark ---------------------------------------------------------------

class SchemaTooSmall(EdaFlowError, ValueError):
    kind = "SchemaTooSmall"


# -- evaluator ---------------------------------------------------------------

class TclSyntaxError(EdaFlowError, ValueError):
    kind = "TclSyntaxError"

    def __init__(self, msg, line):
        self.line = line  # one-based, as in editors
        super().__init__(f"line {line}: {msg}")


class UnterminatedString(TclSyntaxError):
    kind = "UnterminatedString"


class UnterminatedBrace(TclSyntaxError):
    kind = "UnterminatedBrace"


# -- cli ---------------------------------------------------------------------

class ConfigInvalid(EdaFlowError, ValueError):
    kind = "ConfigInvalid"


class PortInUse(EdaFlowError):
    kind = "PortInUse"


ERROR_TYPES = {
    cls.kind: cls
    for cls in [
        InvalidRequest, WorkspaceConflict, MissingUpstream, ExecutorFailure,
        NegativeIndex, ExecutorError, BackendUnavailable, ExecutionTimeout, WorkspaceMissing,
        NoMatches, ArchiveWriteFailed, TemplateError, EmptyPrompt, NoStageDetected,
        SessionUnknown, ModelClientUnavailable, ConfigInvalid, PortInUse, SchemaTooSmall,
    ]
}
