"""Request service: wire text in, wire text out.

One request runs at a time (the denoiser saturates whatever device it got);
behind the runner there is a bounded waiting room of ``queue_depth``
requests, and anything beyond that is rejected immediately as busy rather
than queued without limit. Memory exhaustion inside a pipeline is caught
and turned into an error payload with shrink-the-request advice instead of
killing the process.

``handle`` returns the response text plus an HTTP-ish status code so the
HTTP front end can distinguish bad requests (422) from overload (503) from
resource exhaustion (413); the stdio front end ignores the code.
"""

from __future__ import annotations

import logging
import threading

import numpy as np
import torch

from .config import BackendConfig
from .errors import AdapterError, RequestError, ResourceError
from .pipelines import DiffusionPipelines
from .wire import error_json, parse_request, response_json

log = logging.getLogger(__name__)

_OOM_MARKERS = ("out of memory", "not enough memory", "allocate")


class AdapterService:
    def __init__(self, config: BackendConfig) -> None:
        self.config = config
        self.pipelines = DiffusionPipelines(config)
        self._admission = threading.Semaphore(config.queue_depth + 1)
        self._runner = threading.Lock()

    def describe(self) -> dict:
        return {
            "status": "ok",
            "model": self.config.base_model,
            "device": str(self.pipelines.device),
            "steps": self.config.steps,
        }

    def _dispatch(self, request) -> np.ndarray:
        slots = request.slots
        p = self.pipelines
        if request.kind == "generate":
            return p.generate(slots["distance"], slots["edge-source"], request.directives)
        if request.kind == "align":
            return p.align(slots["canny-source"], slots["tile-source"], request.directives)
        if request.kind == "inpaint":
            return p.inpaint(
                slots["partial-image"], slots["distance"], slots["mask"], request.directives
            )
        return p.upscale(slots["image"], request.directives)

    def handle(self, text: str) -> tuple[str, int]:
        if not self._admission.acquire(blocking=False):
            return error_json("busy: request queue is full, retry later"), 503
        try:
            request = parse_request(text)
            with self._runner:
                image = self._dispatch(request)
            return response_json(image), 200
        except RequestError as e:
            return error_json(str(e)), 422
        except (ResourceError, torch.cuda.OutOfMemoryError) as e:
            return error_json(_oom_message(e)), 413
        except RuntimeError as e:
            if any(marker in str(e).lower() for marker in _OOM_MARKERS):
                return error_json(_oom_message(e)), 413
            log.exception("pipeline failure")
            return error_json(f"pipeline failure: {e}"), 500
        except AdapterError as e:
            return error_json(str(e)), 500
        finally:
            self._admission.release()


def _oom_message(cause: Exception) -> str:
    return (
        "request exhausted memory; lower the image resolution, the upscale "
        f"factor or the configured tile_size and retry ({cause})"
    )
