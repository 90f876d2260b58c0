import base64
import json

import numpy as np
import pytest
from helpers import checker_rgb, radial_distance

from stylizerd.errors import RequestError
from stylizerd.wire import (
    build_request_json,
    error_json,
    parse_request,
    parse_response,
    pfm_decode,
    pfm_encode,
    png_decode,
    png_encode,
    response_json,
)


def test_pfm_round_trip_with_negatives():
    rng = np.random.default_rng(3)
    arr = rng.normal(size=(17, 23)).astype(np.float32)
    arr[0, 0] = -1.0
    back = pfm_decode(pfm_encode(arr))
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back, arr)


def test_pfm_rejects_bad_magic():
    with pytest.raises(RequestError, match="magic"):
        pfm_decode(b"P6\n2 2\n-1.0\n" + b"\0" * 16)


def test_pfm_rejects_truncation():
    data = pfm_encode(np.ones((4, 4), np.float32))
    with pytest.raises(RequestError, match="truncated"):
        pfm_decode(data[:-8])


def test_png_round_trip():
    img = checker_rgb(20, 30)
    back = png_decode(png_encode(img))
    np.testing.assert_array_equal(back, img)


def test_parse_request_generate():
    distance = radial_distance(16, 32)
    edge = checker_rgb(16, 32, cell=4)
    text = build_request_json(
        "generate", {"distance": distance, "edge-source": edge}, {"seed": 5, "style": "x"}
    )
    req = parse_request(text)
    assert req.kind == "generate"
    assert req.seed == 5
    assert req.directives["style"] == "x"
    np.testing.assert_allclose(req.slots["distance"], distance)
    np.testing.assert_array_equal(req.slots["edge-source"], edge)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda o: o.update(kind="sharpen"), "unknown stylize kind"),
        (lambda o: o["slots"].pop("distance"), "missing"),
        (lambda o: o["slots"].update(extra=o["slots"]["edge-source"]), "unexpected"),
        (lambda o: o["directives"].pop("seed"), "mandatory"),
        (lambda o: o["directives"].update(seed="7"), "seed must be an int"),
    ],
)
def test_parse_request_rejects(mutate, message):
    text = build_request_json(
        "generate",
        {"distance": radial_distance(16, 16), "edge-source": checker_rgb(16, 16)},
        {"seed": 1},
    )
    obj = json.loads(text)
    mutate(obj)
    with pytest.raises(RequestError, match=message):
        parse_request(json.dumps(obj))


def test_parse_request_rejects_garbage_json():
    with pytest.raises(RequestError, match="malformed"):
        parse_request("{nope")


def test_parse_request_rejects_bad_base64():
    obj = json.loads(
        build_request_json("upscale", {"image": checker_rgb(16, 16)}, {"seed": 1})
    )
    obj["slots"]["image"]["data"] = "!!not base64!!"
    with pytest.raises(RequestError, match="base64"):
        parse_request(json.dumps(obj))


def test_float_slot_must_be_2d():
    color_pfm = pfm_encode(np.ones((8, 8), np.float32))
    obj = {
        "kind": "upscale",
        "slots": {"image": {"format": "pfm", "data": base64.b64encode(color_pfm).decode()}},
        "directives": {"seed": 1},
    }
    with pytest.raises(RequestError, match="uint8"):
        parse_request(json.dumps(obj))


def test_mask_must_be_float_map():
    obj = json.loads(
        build_request_json(
            "inpaint",
            {
                "partial-image": checker_rgb(16, 16),
                "distance": radial_distance(16, 16),
                "mask": np.zeros((16, 16), np.float32),
            },
            {"seed": 1},
        )
    )
    obj["slots"]["mask"] = obj["slots"]["partial-image"]  # PNG where a PFM belongs
    with pytest.raises(RequestError, match="2-D float map"):
        parse_request(json.dumps(obj))


def test_response_round_trip():
    img = checker_rgb(12, 18)
    np.testing.assert_array_equal(parse_response(response_json(img)), img)


def test_parse_response_surfaces_errors():
    with pytest.raises(RequestError, match="no such luck"):
        parse_response(error_json("no such luck"))
