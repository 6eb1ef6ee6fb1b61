import sys

import numpy as np
import pytest

from impletkit.data import LabeledDataset, TimeSeries

# Adapter that classifies by the sign of the series sum: a stand-in for a
# real model process, deterministic and fast.
GOOD_ADAPTER = """\
import json, math, sys

for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "info":
        resp = {"id": req["id"], "n_classes": 2, "input_length": None}
    elif req["op"] == "predict_proba":
        proba = []
        for row in req["series"]:
            p1 = 1.0 / (1.0 + math.exp(-sum(row)))
            proba.append([1.0 - p1, p1])
        resp = {"id": req["id"], "proba": proba}
    else:
        resp = {"id": req["id"], "error": "unknown op " + str(req.get("op"))}
    sys.stdout.write(json.dumps(resp) + "\\n")
    sys.stdout.flush()
"""

FAULT_ADAPTERS = {
    # answers info, then emits a non-JSON line to every later request
    "malformed": """\
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "info":
        sys.stdout.write(json.dumps({"id": req["id"], "n_classes": 2,
                                     "input_length": None}) + "\\n")
    else:
        sys.stdout.write("this is not json\\n")
    sys.stdout.flush()
""",
    # echoes a wrong id back
    "wrong_id": """\
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    sys.stdout.write(json.dumps({"id": req["id"] + 7, "n_classes": 2,
                                 "input_length": None}) + "\\n")
    sys.stdout.flush()
""",
    # reports a failure through the error field
    "error_field": """\
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    sys.stdout.write(json.dumps({"id": req["id"],
                                 "error": "model exploded"}) + "\\n")
    sys.stdout.flush()
""",
    # exits without answering
    "close": """\
import sys
sys.stdin.readline()
""",
    # never answers
    "hang": """\
import sys, time
sys.stdin.readline()
time.sleep(600)
""",
}


@pytest.fixture
def adapter_cmd(tmp_path):
    script = tmp_path / "good_adapter.py"
    script.write_text(GOOD_ADAPTER)
    return [sys.executable, str(script)]


@pytest.fixture
def fault_adapter(tmp_path):
    def build(kind: str) -> list[str]:
        script = tmp_path / f"{kind}_adapter.py"
        script.write_text(FAULT_ADAPTERS[kind])
        return [sys.executable, str(script)]

    return build


def make_dataset(rows, labels, n_classes=None, metadata=None) -> LabeledDataset:
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    return LabeledDataset(
        samples=tuple(TimeSeries(values=row, id=i) for i, row in enumerate(rows)),
        labels=labels,
        n_classes=int(labels.max()) + 1 if n_classes is None else n_classes,
        metadata=metadata or {},
    )


@pytest.fixture
def separable_dataset():
    """Two classes split by a constant offset; trivially learnable."""
    rng = np.random.default_rng(7)
    lo = rng.normal(-1.0, 0.2, (20, 12))
    hi = rng.normal(1.0, 0.2, (20, 12))
    return make_dataset(np.vstack([lo, hi]), [0] * 20 + [1] * 20)
