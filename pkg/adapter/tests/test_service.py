import json
import threading

import numpy as np
import pytest
from helpers import checker_rgb, fast_config, gradient_rgb, radial_distance

from stylizerd.service import AdapterService
from stylizerd.wire import build_request_json, parse_response


@pytest.fixture(scope="module")
def service():
    return AdapterService(fast_config())


def _generate_request(seed=1, h=16, w=32):
    return build_request_json(
        "generate",
        {"distance": radial_distance(h, w), "edge-source": checker_rgb(h, w)},
        {"seed": seed},
    )


def test_generate_round_trip(service):
    payload, status = service.handle(_generate_request())
    assert status == 200
    img = parse_response(payload)
    assert img.shape == (16, 32, 3)


def test_all_kinds_dispatch(service):
    img = gradient_rgb(16, 32)
    requests = {
        "align": build_request_json(
            "align", {"canny-source": img, "tile-source": img}, {"seed": 2}
        ),
        "inpaint": build_request_json(
            "inpaint",
            {
                "partial-image": img,
                "distance": radial_distance(16, 32),
                "mask": np.ones((16, 32), np.float32),
            },
            {"seed": 3},
        ),
        "upscale": build_request_json("upscale", {"image": img}, {"seed": 4, "upscale_factor": 2}),
    }
    shapes = {"align": (16, 32, 3), "inpaint": (16, 32, 3), "upscale": (32, 64, 3)}
    for kind, text in requests.items():
        payload, status = service.handle(text)
        assert status == 200, (kind, payload)
        assert parse_response(payload).shape == shapes[kind]


def test_malformed_request_is_422(service):
    payload, status = service.handle("{broken")
    assert status == 422
    assert "error" in json.loads(payload)


def test_wrong_slots_is_422(service):
    text = build_request_json("upscale", {"image": gradient_rgb(16, 16)}, {"seed": 1})
    obj = json.loads(text)
    obj["slots"]["bonus"] = obj["slots"]["image"]
    payload, status = service.handle(json.dumps(obj))
    assert status == 422
    assert "unexpected" in json.loads(payload)["error"]


def test_oom_maps_to_413_with_advice(service, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("DefaultCPUAllocator: not enough memory: you tried to allocate 1 TB")

    monkeypatch.setattr(service.pipelines, "generate", boom)
    payload, status = service.handle(_generate_request())
    assert status == 413
    assert "lower the image resolution" in json.loads(payload)["error"]


def test_unexpected_failure_is_500_not_a_crash(service, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("cosmic ray")

    monkeypatch.setattr(service.pipelines, "generate", boom)
    payload, status = service.handle(_generate_request())
    assert status == 500
    assert "cosmic ray" in json.loads(payload)["error"]


def test_backpressure_rejects_when_waiting_room_full():
    service = AdapterService(fast_config(queue_depth=0))
    entered = threading.Event()
    release = threading.Event()

    def slow(*args, **kwargs):
        entered.set()
        release.wait(timeout=10)
        return gradient_rgb(16, 32)

    service.pipelines.generate = slow
    results = {}

    def first():
        results["first"] = service.handle(_generate_request())

    t = threading.Thread(target=first)
    t.start()
    assert entered.wait(timeout=10)
    # the single admission slot is taken; the next request bounces
    payload, status = service.handle(_generate_request(seed=2))
    assert status == 503
    assert "busy" in json.loads(payload)["error"]
    release.set()
    t.join(timeout=10)
    assert results["first"][1] == 200


def test_describe_names_model_and_device(service):
    info = service.describe()
    assert info["status"] == "ok"
    assert info["model"].startswith("identity")
    assert info["device"] in ("cpu", "cuda")
