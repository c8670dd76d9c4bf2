"""Error hierarchy shared by the library, the service, and the CLI.

Every error carries the process exit code the CLI should use, and the
service maps the same hierarchy onto HTTP status codes.
"""


class PostscreenError(Exception):
    """Base class; unexpected internal failures exit with code 3."""

    exit_code = 3
    http_status = 500
    kind = "internal"


class ConfigError(PostscreenError):
    """Invalid or inconsistent run configuration (exit code 1)."""

    exit_code = 1
    http_status = 400
    kind = "config"


class DataError(PostscreenError):
    """Malformed or unusable input data (exit code 2)."""

    exit_code = 2
    http_status = 422
    kind = "data"
