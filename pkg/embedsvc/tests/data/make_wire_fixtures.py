"""Regenerate wire_fixtures.json by recording live app responses.

The recorded bodies pin the hash-8 encoder's exact output, so any change to
the encoder, the JSON shapes, or the status mapping shows up as a fixture
diff. Run from this directory:

    python3 make_wire_fixtures.py
"""
from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from embedsvc import HashEncoder, create_app

CASES = [
    {"name": "health", "method": "GET", "path": "/health"},
    {
        "name": "single-text",
        "method": "POST",
        "path": "/embed",
        "request": {"texts": ["مدرسه الاطفال القريبه"]},
    },
    {
        "name": "batch-preserves-order",
        "method": "POST",
        "path": "/embed",
        "request": {"texts": ["first one", "second one", "first one"]},
    },
    {
        "name": "short-text-zero-vector",
        "method": "POST",
        "path": "/embed",
        "request": {"texts": ["ab"]},
    },
    {
        "name": "empty-batch",
        "method": "POST",
        "path": "/embed",
        "request": {"texts": []},
    },
    {
        "name": "texts-not-strings",
        "method": "POST",
        "path": "/embed",
        "request": {"texts": [1, 2]},
    },
    {
        "name": "missing-texts-key",
        "method": "POST",
        "path": "/embed",
        "request": {"sentences": ["x"]},
    },
    {
        "name": "oversized-batch",
        "method": "POST",
        "path": "/embed",
        "request": {"texts": ["padding string"] * 257},
    },
]


def main() -> None:
    client = TestClient(create_app(HashEncoder(dim=8)))
    recorded = []
    for case in CASES:
        if case["method"] == "GET":
            resp = client.get(case["path"])
        else:
            resp = client.post(case["path"], json=case["request"])
        entry = dict(case)
        entry["status"] = resp.status_code
        entry["response"] = resp.json()
        recorded.append(entry)
    out = Path(__file__).resolve().parent / "wire_fixtures.json"
    out.write_text(
        json.dumps({"encoder": "hash-8", "cases": recorded}, ensure_ascii=False, indent=1)
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(recorded)} cases to {out}")


if __name__ == "__main__":
    main()
