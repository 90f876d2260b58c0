"""Reference stylization backend speaking the panorama pipeline's wire
protocol: seeded diffusion-style generation with a horizontal circular
padding switch, structure-guided alignment, masked inpainting and tiled
upscaling, served over HTTP or stdio."""

from .config import BackendConfig, load_config
from .errors import (
    AdapterError,
    BusyError,
    ConfigError,
    ModelLoadError,
    RequestError,
    ResourceError,
)
from .pipelines import DiffusionPipelines
from .serve import make_http_server, serve_http, serve_stdio
from .service import AdapterService

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "AdapterService",
    "BackendConfig",
    "BusyError",
    "ConfigError",
    "DiffusionPipelines",
    "ModelLoadError",
    "RequestError",
    "ResourceError",
    "load_config",
    "make_http_server",
    "serve_http",
    "serve_stdio",
    "__version__",
]
