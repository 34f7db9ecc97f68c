"""Shared test helpers: a small on-disk memo for expensive Monte Carlo runs.

Results are keyed by a human-readable tag covering every input that could
change the numbers.  Delete tests/_cache to force recomputation.
"""

import hashlib
import json
import pathlib

CACHE_DIR = pathlib.Path(__file__).parent / "_cache"


def memo_json(tag: str, build):
    CACHE_DIR.mkdir(exist_ok=True)
    path = CACHE_DIR / (hashlib.sha256(tag.encode()).hexdigest()[:24] + ".json")
    if path.exists():
        return json.loads(path.read_text())["value"]
    value = build()
    path.write_text(json.dumps({"tag": tag, "value": value}, indent=2, sort_keys=True))
    return value
