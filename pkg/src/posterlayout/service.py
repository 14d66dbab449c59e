"""HTTP API around constrained generation and layout evaluation.

Endpoints: POST /api/generate, POST /api/evaluate, GET /api/health; the
OpenAPI description is served at /api/spec. Responses are deterministic for
identical (request, seed) pairs. Constraints are soft model conditioning; a
guarantee layer re-samples up to MAX_RESAMPLES times when a requested
category is missing from a proposal.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware

from .checkpoint import load_generator, read_header
from .core import BBox, Category, Element, Layout, LayoutError
from .dam import align_test
from .generator import constraint_tensors, output_to_layout
from .imaging import decode_image, load_image
from .metrics import (
    RandomFeatureExtractor,
    r_ali,
    r_com,
    r_occ,
    r_ove,
    r_shm,
    r_sub,
    r_und,
    salient_image,
)
from .training import scatter_to_slots

MAX_UPLOAD_BYTES = 10 * 1024 * 1024
MAX_RESAMPLES = 3
MAX_PROPOSALS = 32

CATEGORY_NAMES = {
    "logo": Category.LOGO,
    "text": Category.TEXT,
    "underlay": Category.UNDERLAY,
    "embellishment": Category.EMBELLISHMENT,
}


def _bad_request(msg: str) -> HTTPException:
    return HTTPException(status_code=400, detail=msg)


def _parse_category(value: Any) -> Category:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in CATEGORY_NAMES:
            return CATEGORY_NAMES[key]
        raise _bad_request(f"unknown category name {value!r}")
    try:
        idx = int(value)
    except (TypeError, ValueError):
        raise _bad_request(f"category must be 1..4 or a name, got {value!r}")
    if idx not in (1, 2, 3, 4):
        raise _bad_request(f"category index {idx} outside 1..4")
    return Category(idx)


def _parse_elements(items: Any, canvas_w: int, canvas_h: int, what: str) -> Layout:
    if not isinstance(items, list):
        raise _bad_request(f"{what} must be a list of {{category, box}} objects")
    elements = []
    for raw in items:
        if not isinstance(raw, dict) or "category" not in raw or "box" not in raw:
            raise _bad_request(f"each {what} entry needs 'category' and 'box'")
        cat = _parse_category(raw["category"])
        box = raw["box"]
        if not isinstance(box, (list, tuple)) or len(box) != 4:
            raise _bad_request("box must hold 4 numbers [cx, cy, w, h]")
        try:
            elements.append(Element(cat, BBox(*[float(v) for v in box])))
        except (TypeError, ValueError) as exc:
            raise _bad_request(f"box values must be numbers: {exc}")
        except LayoutError as exc:
            raise _bad_request(str(exc))
    return Layout(tuple(elements), canvas_w, canvas_h)


def _layout_to_obj(layout: Layout) -> dict:
    return {
        "width": layout.canvas_w,
        "height": layout.canvas_h,
        "elements": [
            {"category": int(e.category), "box": list(e.box.as_tuple())}
            for e in layout.real_elements
        ],
    }


async def _read_image_and_payload(request: Request) -> tuple[np.ndarray, dict]:
    """Accept either multipart (image file + JSON payload field) or JSON body."""
    ctype = request.headers.get("content-type", "")
    if ctype.startswith("multipart/form-data"):
        form = await request.form()
        upload = form.get("image")
        if upload is None or isinstance(upload, str):
            raise _bad_request("multipart request needs an 'image' file field")
        data = await upload.read()
        if len(data) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="image exceeds 10 MB")
        try:
            image = decode_image(data)
        except Exception as exc:
            raise _bad_request(f"cannot decode image: {exc}")
        raw = form.get("payload", "{}")
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _bad_request(f"payload field is not valid JSON: {exc}")
        if not isinstance(payload, dict):
            raise _bad_request("payload must be a JSON object")
        return image, payload
    try:
        payload = await request.json()
    except json.JSONDecodeError as exc:
        raise _bad_request(f"body is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise _bad_request("body must be a JSON object")
    path = payload.get("image_path")
    if not path:
        raise _bad_request("JSON requests need 'image_path' (or send multipart)")
    p = Path(path)
    if not p.is_file():
        raise _bad_request(f"image_path not found: {path}")
    if p.stat().st_size > MAX_UPLOAD_BYTES:
        raise HTTPException(status_code=413, detail="image exceeds 10 MB")
    try:
        image = load_image(p)
    except Exception as exc:
        raise _bad_request(f"cannot read image {path}: {exc}")
    return image, payload


def _positive_int(payload: dict, key: str, default: int, lo: int, hi: int) -> int:
    value = payload.get(key, default)
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise _bad_request(f"{key} must be an integer")
    if not lo <= value <= hi:
        raise _bad_request(f"{key} must lie in [{lo}, {hi}]")
    return value


def create_app(weights: Optional[str | Path] = None) -> FastAPI:
    """Build the service; weights may be loaded now or left absent (503s)."""
    app = FastAPI(title="posterlayout service", openapi_url="/api/spec")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state: dict[str, Any] = {"gen": None, "version": None}
    infer_lock = threading.Lock()

    if weights is not None:
        state["gen"] = load_generator(weights)
        header = read_header(weights)
        epoch = header.get("epoch")
        state["version"] = f"ckpt-v{header['version']}-epoch-{epoch}"

    def require_model():
        if state["gen"] is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return state["gen"]

    @app.get("/api/health")
    def health():
        if state["gen"] is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {"status": "ok", "weights_version": state["version"]}

    @app.post("/api/generate")
    async def api_generate(request: Request):
        gen = require_model()
        image, payload = await _read_image_and_payload(request)
        h, w = image.shape[:2]
        n_proposals = _positive_int(payload, "n_proposals", 1, 1, MAX_PROPOSALS)
        seed = _positive_int(payload, "seed", 0, 0, 2**31 - 1)
        threshold = payload.get("threshold", 0.5)
        try:
            threshold = float(threshold)
        except (TypeError, ValueError):
            raise _bad_request("threshold must be a number")
        if not 0.0 <= threshold <= 1.0:
            raise _bad_request("threshold must lie in [0, 1]")
        constraint = _parse_elements(
            payload.get("constraints", []), w, h, "constraints"
        )
        if constraint.n > gen.cfg.n_max:
            raise _bad_request(
                f"{constraint.n} constraints exceed model capacity {gen.cfg.n_max}"
            )
        wanted = {e.category for e in constraint.real_elements}

        dam = align_test(image)
        attention = dam.data[3]
        proposals = []
        with infer_lock:
            gen.eval()
            with torch.no_grad():
                x = torch.from_numpy(dam.data[None])
                for i in range(n_proposals):
                    layout = None
                    satisfied = False
                    for attempt in range(1 + MAX_RESAMPLES):
                        if constraint.n > 0:
                            rng = np.random.default_rng([seed, i, attempt])
                            cats, boxes = scatter_to_slots(
                                constraint, gen.cfg.n_max, rng
                            )
                            cats, boxes = cats[None], boxes[None]
                        else:
                            cats, boxes = constraint_tensors(None, gen.cfg.n_max)
                        out = gen(x, cats, boxes)
                        layout = output_to_layout(
                            out.probs[0], out.boxes[0], w, h, threshold
                        )
                        got = {e.category for e in layout.real_elements}
                        satisfied = wanted <= got
                        if satisfied or not wanted:
                            break
                    proposals.append((layout, satisfied))

        body = {
            "proposals": [
                {
                    "layout": _layout_to_obj(layout),
                    "metrics": {
                        "r_com": r_com(image, layout),
                        "r_sub": r_sub(attention, layout),
                        "r_und": r_und(layout),
                    },
                    "constraints_satisfied": satisfied,
                }
                for layout, satisfied in proposals
            ],
            "model": {"weights_version": state["version"]},
        }
        return body

    @app.post("/api/evaluate")
    async def api_evaluate(request: Request):
        image, payload = await _read_image_and_payload(request)
        h, w = image.shape[:2]
        raw_layout = payload.get("layout")
        if not isinstance(raw_layout, dict) or "elements" not in raw_layout:
            raise _bad_request("layout must be an object with an 'elements' list")
        lw = raw_layout.get("width", w)
        lh = raw_layout.get("height", h)
        if (lw, lh) != (w, h):
            raise _bad_request(
                f"layout canvas {lw}x{lh} does not match image {w}x{h}"
            )
        layout = _parse_elements(raw_layout["elements"], w, h, "layout elements")

        from .dam import SpectralResidualSaliency

        attention = SpectralResidualSaliency()(image)
        extractor = RandomFeatureExtractor()
        values = {
            "r_occ": r_occ([layout]),
            "r_com": r_com(image, layout),
            "r_sub": r_sub(attention, layout),
            "r_shm": r_shm(salient_image(image, attention), layout, extractor),
            "r_ove": r_ove(layout),
            "r_ali": r_ali(layout),
            "r_und": r_und(layout),
        }
        return {
            "metrics": values,
            "empty": layout.n == 0,
            "skipped": sorted(k for k, v in values.items() if v is None),
        }

    return app
