#!/usr/bin/env python3
"""SAM inference worker: one JSON request per line on stdin, one reply per line.

The Node adapter owns the public wire protocol; this script only does the
torch-side work, split into two ops so the caller can cache the expensive
half:

  {"op": "encode", "id": 1, "image_path": "..."}
      -> {"ok": true, "id": 1, "embedding": "e0", "height": H, "width": W}
  {"op": "decode", "id": 2, "embedding": "e0", "points": [[x, y], ...],
   "labels": [1, ...], "box": [x0, y0, x1, y1] | null, "multimask": true}
      -> {"ok": true, "id": 2, "mask_rle": {...}, "score": 0.93}

Encoder outputs are stashed in memory under the returned embedding ids (FIFO,
bounded). The first line on stdout is a ready/failure report; a load failure
exits 1 so the parent can give up immediately. Failures after startup are
reported per request with {"ok": false, ...} and the loop keeps going.
"""

import argparse
import json
import sys
from collections import OrderedDict

# Stashed encoder states kept before the oldest is dropped. Twice the parent
# cache size so eviction over there never races eviction over here.
STASH_LIMIT = 64


def rle_encode_colmajor(bits):
    """Column-major RLE with counts starting at background (COCO convention)."""
    flat = bits.flatten(order="F")
    counts = []
    run_value = False
    run_length = 0
    for v in flat:
        if bool(v) == run_value:
            run_length += 1
        else:
            counts.append(run_length)
            run_value = bool(v)
            run_length = 1
    counts.append(run_length)
    return {"size": [int(bits.shape[0]), int(bits.shape[1])], "counts": counts}


def emit(obj):
    sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")
    sys.stdout.flush()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--variant", default="vit_h")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args()

    try:
        import numpy as np
        from PIL import Image

        from segment_anything import SamPredictor, sam_model_registry

        sam = sam_model_registry[args.variant](checkpoint=args.checkpoint)
        sam.to(args.device)
        predictor = SamPredictor(sam)
    except Exception as exc:
        emit({"ok": False, "error": f"model load failed: {exc}"})
        return 1

    emit({"ok": True, "ready": True, "variant": args.variant})

    stash = OrderedDict()
    next_id = 0

    def handle_encode(req):
        nonlocal next_id
        image = Image.open(req["image_path"]).convert("RGB")
        array = np.asarray(image)
        predictor.set_image(array)
        eid = f"e{next_id}"
        next_id += 1
        stash[eid] = (predictor.features, predictor.original_size, predictor.input_size)
        while len(stash) > STASH_LIMIT:
            stash.popitem(last=False)
        height, width = array.shape[:2]
        return {"ok": True, "id": req["id"], "embedding": eid, "height": height, "width": width}

    def handle_decode(req):
        eid = req["embedding"]
        if eid not in stash:
            raise KeyError(f"embedding {eid} expired; re-encode the image")
        predictor.features, predictor.original_size, predictor.input_size = stash[eid]
        predictor.is_image_set = True
        points = req.get("points") or []
        kwargs = {}
        if points:
            kwargs["point_coords"] = np.asarray(points, dtype=np.float64)
            kwargs["point_labels"] = np.asarray(req["labels"], dtype=np.int64)
        if req.get("box") is not None:
            kwargs["box"] = np.asarray(req["box"], dtype=np.float64)
        if not kwargs:
            raise ValueError("empty prompt: need points or a box")
        masks, scores, _ = predictor.predict(
            multimask_output=bool(req.get("multimask")), **kwargs
        )
        best = int(np.argmax(scores))
        return {
            "ok": True,
            "id": req["id"],
            "mask_rle": rle_encode_colmajor(masks[best].astype(bool)),
            "score": float(scores[best]),
        }

    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            emit({"ok": False, "id": None, "error": f"bad JSON: {exc}"})
            continue
        try:
            op = req.get("op")
            if op == "encode":
                emit(handle_encode(req))
            elif op == "decode":
                emit(handle_decode(req))
            else:
                raise ValueError(f"unknown op {op!r}")
        except Exception as exc:  # report per request, keep serving
            emit({"ok": False, "id": req.get("id"), "error": str(exc)})
    return 0


if __name__ == "__main__":
    sys.exit(main())
