"""Drive the HTTP service the way the web UI does.

Starts the FastAPI app in-process (no network needed), uploads an image
with a constraint, and walks through the response: proposals, per-proposal
quick metrics, and the constraint guarantee. Point a real client at a
running server with `posterlayout serve --weights <ckpt>` instead.

Run from the repository root (after demo 03 has trained a checkpoint):

    python3 demos/05_service.py
"""

import io
import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from posterlayout.service import create_app

TRAIN_OUT = Path(__file__).parent / "out" / "train"


def png_bytes(rng: np.random.Generator, w: int, h: int) -> bytes:
    arr = (rng.uniform(0.2, 0.8, (h, w, 3)) * 255).astype("uint8")
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def main() -> None:
    ckpt = TRAIN_OUT / "run" / "model.ckpt"
    if not ckpt.exists():
        raise SystemExit("run demos/03_train_and_generate.py first to train a checkpoint")

    client = TestClient(create_app(ckpt))
    print("health:", client.get("/api/health").json())

    payload = {
        "n_proposals": 3,
        "seed": 11,
        "threshold": 0.05,
        "constraints": [{"category": "text", "box": [0.5, 0.2, 0.7, 0.15]}],
    }
    image = png_bytes(np.random.default_rng(3), 64, 88)
    resp = client.post(
        "/api/generate",
        files={"image": ("canvas.png", image, "image/png")},
        data={"payload": json.dumps(payload)},
    )
    resp.raise_for_status()
    body = resp.json()
    print(f"model {body['model']['weights_version']}, {len(body['proposals'])} proposals:")
    for i, p in enumerate(body["proposals"]):
        n = len(p["layout"]["elements"])
        ok = "yes" if p["constraints_satisfied"] else "no"
        metrics = {k: (None if v is None else round(v, 4)) for k, v in p["metrics"].items()}
        print(f"  #{i + 1}: {n} elements, constraint satisfied: {ok}, metrics: {metrics}")

    # Error handling is part of the contract: malformed boxes are a 400
    # with a readable message, and the editor keeps its state.
    bad = client.post(
        "/api/generate",
        files={"image": ("canvas.png", image, "image/png")},
        data={"payload": json.dumps({"constraints": [{"category": "text", "box": [2, 0, 1, 1]}]})},
    )
    print(f"malformed constraint -> {bad.status_code}: {bad.json()['detail']}")


if __name__ == "__main__":
    main()
