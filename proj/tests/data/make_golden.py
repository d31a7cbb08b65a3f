"""Writes the golden activation-cache fixtures.

Run from this directory: python3 make_golden.py
"""
import json
import struct

ROWS, DIM = 3, 4


def value(i, j):
    return (i + 1) * 0.25 - j * 0.5


def manifest(dtype, **overrides):
    m = {
        "created_unix_ms": 1700000000000,
        "dim": DIM,
        "dtype": dtype,
        "layer_index": 9,
        "model_id": "golden-model",
        "n_examples_per_prompt": 10,
        "n_prompts": ROWS,
        "seed": 42,
        "task_label": "antonyms",
    }
    m.update(overrides)
    return json.dumps(m, sort_keys=True, separators=(",", ":")).encode()


def payload(dtype, values=None):
    fmt = "<f" if dtype == "f32" else "<d"
    out = b""
    for i in range(ROWS):
        for j in range(DIM):
            v = value(i, j) if values is None else values(i, j)
            out += struct.pack(fmt, v)
    return out


def cache(man, body, magic=b"ACTCACH1"):
    return magic + struct.pack("<Q", len(man)) + man + body


def write(name, data):
    with open(name, "wb") as f:
        f.write(data)


write("golden_f32.actcache", cache(manifest("f32"), payload("f32")))
write("golden_f64.actcache", cache(manifest("f64"), payload("f64")))
write("golden_bad_magic.actcache", cache(manifest("f32"), payload("f32"), magic=b"NOTCACH1"))
write("golden_bad_version.actcache", cache(manifest("f32"), payload("f32"), magic=b"ACTCACH2"))
write("golden_truncated.actcache", b"ACTCACH1\x05\x00")
write("golden_short_payload.actcache", cache(manifest("f32"), payload("f32")[:-4]))
write("golden_nonfinite.actcache",
      cache(manifest("f64"), payload("f64", lambda i, j: float("nan") if (i, j) == (1, 2) else value(i, j))))
m = json.loads(manifest("f32"))
del m["dim"]
write("golden_missing_dim.actcache",
      cache(json.dumps(m, sort_keys=True, separators=(",", ":")).encode(), payload("f32")))
