"""Shared exception types. Every error carries a stable machine-readable code
so the API layer and CLI can map failures without string matching."""

from __future__ import annotations


class TetherError(Exception):
    code = "INTERNAL"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def __str__(self):
        return self.message


class ParseError(TetherError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message, line=line)
        self.line = line


class OrderError(TetherError):
    code = "ORDER_ERROR"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message, line=line)
        self.line = line


class VersionError(TetherError):
    code = "VERSION_ERROR"


class SinkClosed(TetherError):
    code = "SINK_CLOSED"


class PlatformUnavailable(TetherError):
    code = "PLATFORM_UNAVAILABLE"


class ClockSkew(TetherError):
    code = "CLOCK_SKEW"


class BadParams(TetherError):
    code = "BAD_PARAMS"


class EmbedFailed(TetherError):
    code = "EMBED_FAILED"


class DuplicateInFlight(TetherError):
    code = "DUPLICATE_IN_FLIGHT"


class GatewayTimeout(TetherError):
    code = "TIMEOUT"

    def __init__(self, message: str, request_id: str | None = None):
        super().__init__(message, request_id=request_id)
        self.request_id = request_id


class ProviderError(TetherError):
    code = "PROVIDER_ERROR"

    def __init__(self, message: str, status: int | None = None, request_id: str | None = None):
        super().__init__(message, status=status, request_id=request_id)
        self.status = status
        self.request_id = request_id


class RateLimited(ProviderError):
    code = "RATE_LIMITED"


class DimensionMismatch(TetherError):
    code = "DIMENSION_MISMATCH"


class TemplateMissing(TetherError):
    code = "TEMPLATE_MISSING"

    def __init__(self, template_id: str):
        super().__init__(f"no template for id '{template_id}'", template_id=template_id)
        self.template_id = template_id


class BudgetImpossible(TetherError):
    code = "BUDGET_IMPOSSIBLE"


class StoreIOError(TetherError):
    code = "IO_ERROR"


class StoreFull(TetherError):
    code = "STORE_FULL"


class CorruptionError(TetherError):
    code = "CORRUPTION"

    def __init__(self, message: str, backup_path: str | None = None):
        super().__init__(message, backup_path=backup_path)
        self.backup_path = backup_path


class ConfigError(TetherError):
    code = "CONFIG_ERROR"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message, line=line)
        self.line = line
