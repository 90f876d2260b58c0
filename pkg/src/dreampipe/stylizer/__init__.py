"""Stylizer protocol, transports, and the deterministic mock backend."""

from .client import (
    HttpTransport,
    LocalTransport,
    StylizerClient,
    SubprocessTransport,
    make_stylizer,
)
from .mock import MockStylizer
from .protocol import (
    DEFAULT_DIRECTIVES,
    KIND_SLOTS,
    StylizeRequest,
    StylizeResponse,
)
from .serve import make_http_server, serve_http, serve_stdio

__all__ = [
    "DEFAULT_DIRECTIVES",
    "KIND_SLOTS",
    "HttpTransport",
    "LocalTransport",
    "MockStylizer",
    "StylizeRequest",
    "StylizeResponse",
    "StylizerClient",
    "SubprocessTransport",
    "make_http_server",
    "make_stylizer",
    "serve_http",
    "serve_stdio",
]
