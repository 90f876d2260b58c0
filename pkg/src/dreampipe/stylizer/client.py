"""Client-side access to a stylizer over any transport.

Transports expose ``call(StylizeRequest) -> StylizeResponse``:

  - :class:`LocalTransport` calls a backend object in-process,
  - :class:`HttpTransport` POSTs the request JSON to a ``/stylize`` endpoint,
  - :class:`SubprocessTransport` speaks newline-delimited JSON over the
    stdin/stdout of a spawned process (respawned if it dies).

:class:`StylizerClient` wraps a transport with retries (exponential backoff,
injectable sleep for tests), response shape validation against the protocol's
size rules, and convenience methods named after the four operations.
"""

from __future__ import annotations

import subprocess
import time
import urllib.error
import urllib.request

import numpy as np

from ..errors import BackendError
from .protocol import StylizeRequest, StylizeResponse


class LocalTransport:
    def __init__(self, backend) -> None:
        self._backend = backend

    def call(self, request: StylizeRequest) -> StylizeResponse:
        return self._backend.handle(request)

    def close(self) -> None:
        pass


class HttpTransport:
    def __init__(self, url: str, timeout: float = 120.0) -> None:
        self.url = url
        self.timeout = timeout

    def call(self, request: StylizeRequest) -> StylizeResponse:
        req = urllib.request.Request(
            self.url,
            data=request.to_json().encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read().decode("utf-8")
        except urllib.error.HTTPError as e:
            detail = ""
            try:
                detail = e.read().decode("utf-8", errors="replace")
            except OSError:
                pass
            raise BackendError(f"stylizer HTTP {e.code}: {detail or e.reason}") from e
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as e:
            raise BackendError(f"stylizer unreachable at {self.url}: {e}") from e
        return StylizeResponse.from_json(body)

    def close(self) -> None:
        pass


class SubprocessTransport:
    def __init__(self, argv: list[str]) -> None:
        if not argv:
            raise ValueError("subprocess transport needs a command")
        self.argv = list(argv)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def call(self, request: StylizeRequest) -> StylizeResponse:
        proc = self._ensure()
        try:
            proc.stdin.write(request.to_json() + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as e:
            self.close()
            raise BackendError(f"stylizer process pipe failed: {e}") from e
        if not line:
            code = proc.poll()
            self.close()
            raise BackendError(f"stylizer process closed its output (exit {code})")
        return StylizeResponse.from_json(line)

    def close(self) -> None:
        if self._proc is not None:
            proc, self._proc = self._proc, None
            try:
                if proc.stdin:
                    proc.stdin.close()
                proc.terminate()
                proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                proc.kill()


class StylizerClient:
    def __init__(
        self,
        transport,
        retries: int = 3,
        backoff: float = 0.5,
        sleep=time.sleep,
        directives: dict | None = None,
    ) -> None:
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.transport = transport
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._directives = dict(directives or {})

    def call(self, kind: str, slots: dict[str, np.ndarray], seed: int, **directives) -> np.ndarray:
        merged = dict(self._directives)
        merged.update(directives)
        merged["seed"] = int(seed)
        request = StylizeRequest(kind=kind, slots=slots, directives=merged)
        last: BackendError | None = None
        for attempt in range(self.retries):
            try:
                response = self.transport.call(request)
            except BackendError as e:
                last = e
                if attempt + 1 < self.retries:
                    self._sleep(self.backoff * (2.0 ** attempt))
                continue
            expected = request.expected_shape()
            got = response.image.shape[:2]
            if got != expected:
                # a wrong-size answer is a contract violation, not flakiness
                raise BackendError(
                    f"{kind}: backend returned {got[1]}x{got[0]}, expected "
                    f"{expected[1]}x{expected[0]}"
                )
            return response.image
        raise last if last is not None else BackendError(f"{kind}: no attempts made")

    def generate(self, distance, edge_source, seed, **directives) -> np.ndarray:
        return self.call(
            "generate", {"distance": distance, "edge-source": edge_source}, seed, **directives
        )

    def align(self, canny_source, tile_source, seed, **directives) -> np.ndarray:
        return self.call(
            "align",
            {"canny-source": canny_source, "tile-source": tile_source},
            seed,
            **directives,
        )

    def inpaint(self, image, distance, mask, seed, **directives) -> np.ndarray:
        return self.call(
            "inpaint",
            {"partial-image": image, "distance": distance, "mask": mask},
            seed,
            **directives,
        )

    def upscale(self, image, seed, factor: int | None = None, **directives) -> np.ndarray:
        if factor is not None:
            directives["upscale_factor"] = int(factor)
        return self.call("upscale", {"image": image}, seed, **directives)

    def close(self) -> None:
        self.transport.close()


def make_stylizer(
    backend: str = "mock",
    url: str | None = None,
    command: list[str] | None = None,
    retries: int = 3,
    backoff: float = 0.5,
    directives: dict | None = None,
) -> StylizerClient:
    """Build a client from config-style fields: ``mock``, ``http`` (needs
    ``url``), or ``subprocess`` (needs ``command``)."""
    if backend == "mock":
        from .mock import MockStylizer

        transport = LocalTransport(MockStylizer())
    elif backend == "http":
        if not url:
            raise ValueError("http stylizer backend needs a url")
        transport = HttpTransport(url)
    elif backend == "subprocess":
        if not command:
            raise ValueError("subprocess stylizer backend needs a command")
        transport = SubprocessTransport(command)
    else:
        raise ValueError(f"unknown stylizer backend {backend!r}")
    return StylizerClient(transport, retries=retries, backoff=backoff, directives=directives)
