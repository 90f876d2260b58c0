"""Error taxonomy for the backend service.

Every error a request can trigger maps onto one wire-level ``{"error": ...}``
payload; the HTTP front end additionally distinguishes status codes so load
balancers and clients can tell a bad request (422) from an overloaded server
(503) from a request that was simply too large to process (413).
"""


class AdapterError(Exception):
    """Base class; anything the service can turn into an error payload."""


class ConfigError(AdapterError):
    """Bad service configuration file or field value."""


class ModelLoadError(AdapterError):
    """A model id named in the config could not be materialized."""


class RequestError(AdapterError):
    """The request violates the wire protocol (unknown kind, wrong slots,
    undecodable payload, missing seed)."""


class BusyError(AdapterError):
    """The waiting room is full; the client should back off and retry."""


class ResourceError(AdapterError):
    """The request exhausted memory; carries advice on how to shrink it."""
