"""Acceptance gate: one test per top-level criterion, each with an explicit
runtime budget. Every test finishes by printing a single PASS line; a
failed assertion marks the criterion FAIL through pytest itself.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import json
import math
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from impletkit.attribution import AttributionConfig, attribute_dataset
from impletkit.cohort import (MODE_VALUES, MODE_VALUES_ATTR, ClusterParams,
                              cluster_implets)
from impletkit.data import split_half
from impletkit.extraction import (Implet, ImpletParams, brute_force_extract,
                                  extract_dataset, extract_implets)
from impletkit.models import (KIND_LINEAR, TrainConfig, accuracy,
                              predict_proba, save_model, train_builtin)
from impletkit.perturb import (KIND_MEAN, KIND_SMOOTH, RemovalSpec, cils_eval,
                               control_point_count, faithfulness_eval,
                               smooth_removal_detail)
from impletkit.synth import SynthSpec, generate
from impletkit.tsdist import dba_cost_history, dtw_distance

import oracles

REPO = Path(__file__).resolve().parent.parent


class Budget:
    """Wall-clock guard; announce() asserts the elapsed time and prints the
    one-line verdict for the criterion."""

    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds
        self.t0 = time.perf_counter()

    def announce(self, detail: str = ""):
        elapsed = time.perf_counter() - self.t0
        assert elapsed < self.seconds, (
            f"{self.name}: {elapsed:.1f}s exceeded the {self.seconds:.0f}s budget")
        suffix = f" [{detail}]" if detail else ""
        print(f"ACCEPTANCE {self.name}: PASS ({elapsed:.1f}s){suffix}")


# --- the frozen synthetic-pipeline recipe shared by criteria 7-9 ---

OCCLUSION = dict(method="occlusion", window=9, stride=1, baseline="sample_mean")
IMPLET_PARAMS = ImpletParams(len_max=16)
TRAIN = TrainConfig(epochs=300, l2=0.3, seed=0)


def synthetic_pipeline(seed: int):
    """Dataset with package defaults (T=100, n=100/class), half split,
    linear model, occlusion attributions, implets on the test half."""
    ds = generate(SynthSpec(seed=seed))
    train_half, test_half = split_half(ds, seed=seed)
    model = train_builtin(train_half, KIND_LINEAR, TRAIN)
    attrs = attribute_dataset(model, test_half, AttributionConfig(**OCCLUSION))
    implets = extract_dataset(test_half, attrs, IMPLET_PARAMS)
    return ds, test_half, model, attrs, implets


def test_extraction_oracle_equivalence():
    budget = Budget("extraction oracle equivalence", 10.0)
    rng = np.random.default_rng(0)
    checked = 0
    for n_pairs, T in ((500, 50), (50, 500)):
        for _ in range(n_pairs):
            x = rng.normal(0, 1, T)
            w = rng.normal(0, 1, T)
            for scoring in ("sum", "mean"):
                params = ImpletParams(scoring=scoring)
                assert extract_implets(x, w, params) == \
                    brute_force_extract(x, w, params)
                checked += 1
    budget.announce(f"{checked} extractions compared, exact")


def test_extraction_fixtures():
    budget = Budget("extraction fixtures", 1.0)
    params = ImpletParams(lam=0.1, phi=1.0, len_min=3, len_max=10)
    assert extract_implets(np.zeros(20), np.zeros(20), params) == []
    w = np.zeros(20)
    w[4] = 2.0
    out = extract_implets(np.arange(20.0), w, params)
    assert [(im.l, im.r, im.score) for im in out] == [(5, 14, 3.0)]
    assert brute_force_extract(np.arange(20.0), w, params) == out
    budget.announce("zero -> [], spike -> (5, 14, 3.0)")


def test_dtw_correctness():
    budget = Budget("DTW vs brute-force recursion", 10.0)
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(200):
        channels = 1 if i % 2 == 0 else 2
        a = rng.normal(0, 1, (int(rng.integers(2, 13)), channels))
        b = rng.normal(0, 1, (int(rng.integers(2, 13)), channels))
        got = dtw_distance(a, b)
        want = oracles.dtw_recursive(a, b)
        worst = max(worst, abs(got - want))
        assert abs(got - want) < 1e-9
        assert dtw_distance(a, a) == 0.0
        assert dtw_distance(a, b) == dtw_distance(b, a)
    budget.announce(f"200 pairs, max abs diff {worst:.2e}")


def test_dba_monotonicity():
    budget = Budget("DBA cost monotonicity", 30.0)
    rng = np.random.default_rng(2)
    for trial in range(10):
        channels = 1 if trial % 2 == 0 else 2
        n_members = int(rng.integers(5, 21))
        members = [rng.normal(0, 1, (int(rng.integers(5, 31)), channels))
                   for _ in range(n_members)]
        init = members[int(rng.integers(0, n_members))]
        history = dba_cost_history(members, init, max_iter=10)
        for before, after in zip(history, history[1:]):
            assert after <= before + 1e-9, (
                f"set {trial}: cost rose {before} -> {after}")
    budget.announce("10 member sets, every iteration non-increasing")


def _two_motif_implets(seed):
    rng = np.random.default_rng(seed)
    shape_a = np.array([0.0, 5.0, 0.0, -5.0, 0.0])
    shape_b = np.array([50.0, 55.0, 60.0, 55.0, 50.0])
    implets, truth = [], []
    for i in range(8):
        for which, shape in enumerate((shape_a, shape_b)):
            vals = shape + rng.normal(0, 0.01, 5)
            implets.append(Implet(sample_id=2 * i + which, class_id=1, l=1,
                                  r=5, values=vals, attributions=np.ones(5),
                                  score=2.0))
            truth.append(which)
    return implets, np.array(truth)


def test_clustering_recovery():
    budget = Budget("clustering recovery", 60.0)
    # confirm the fixture is as separated as claimed
    implets, truth = _two_motif_implets(0)
    intra = max(dtw_distance(implets[0].values, implets[2].values),
                dtw_distance(implets[1].values, implets[3].values))
    inter = dtw_distance(implets[0].values, implets[1].values)
    assert inter / intra >= 100

    wins = 0
    for seed in range(10):
        implets, truth = _two_motif_implets(seed)
        res = cluster_implets(implets,
                              ClusterParams(k_max=4, repeats=3, seed=seed))
        if res.k_star != 2:
            continue
        total = sum(np.bincount(truth[res.assignments == c]).max()
                    for c in range(2))
        if total == len(implets):
            wins += 1
    assert wins >= 9
    budget.announce(f"k*=2 with purity 1.0 on {wins}/10 seeds")


def test_removal_constraints():
    budget = Budget("smooth removal constraints", 5.0)
    rng = np.random.default_rng(3)
    for trial in range(100):
        T = int(rng.integers(10, 120))
        x = rng.normal(0, 1, T)
        l = int(rng.integers(1, T))
        r = int(rng.integers(l + 1, T + 1))
        detail = smooth_removal_detail(x, l, r, trial)
        out = detail.values
        mask = np.ones(T, dtype=bool)
        mask[l - 1:r] = False
        assert np.array_equal(out[mask], x[mask]), "outside changed"
        assert out[l - 1] == x[l - 1] and out[r - 1] == x[r - 1]
        assert abs(detail.slope_left - detail.target_slope_left) < 1e-6
        assert abs(detail.slope_right - detail.target_slope_right) < 1e-6
        assert np.all(detail.control_residuals < 1e-8)
        assert len(detail.positions) == max(math.ceil((r - l + 1) / 10), 2)
        assert control_point_count(r - l + 1) == len(detail.positions)
    budget.announce("100 random triples, all constraints hold")


def _iou_pass_fraction(dataset_meta, test_half, implets):
    (tl, tr), = dataset_meta["truth_intervals"]["1"]
    by_sample = {}
    for im in implets:
        by_sample.setdefault(im.sample_id, []).append(im)
    n_class1 = 0
    n_pass = 0
    for pos, label in enumerate(test_half.labels):
        if label != 1:
            continue
        n_class1 += 1
        best = 0.0
        for im in by_sample.get(pos, []):
            inter = max(0, min(im.r, tr) - max(im.l, tl) + 1)
            union = (im.r - im.l + 1) + (tr - tl + 1) - inter
            best = max(best, inter / union)
        if best >= 0.5:
            n_pass += 1
    return n_pass, n_class1


def test_synthetic_faithfulness():
    budget = Budget("synthetic faithfulness", 300.0)
    ds, test_half, model, attrs, implets = synthetic_pipeline(seed=0)
    acc = accuracy(model, test_half)
    assert acc >= 0.95, f"test accuracy {acc}"
    n_pass, n_class1 = _iou_pass_fraction(ds.metadata, test_half, implets)
    assert n_pass >= 0.8 * n_class1, f"IoU>=0.5 on {n_pass}/{n_class1}"
    report = faithfulness_eval(model, test_half, implets,
                               RemovalSpec(kind=KIND_SMOOTH, seed=0),
                               random_trials=10)
    assert report.delta >= 0.30, f"delta {report.delta:.3f}"
    budget.announce(f"acc={acc:.2f}, IoU {n_pass}/{n_class1}, "
                    f"delta={report.delta:.3f}")


def test_mean_fill_and_multi_segment_modes():
    budget = Budget("mean-fill and multi-segment modes", 300.0)
    _, test_half, model, _, implets = synthetic_pipeline(seed=0)
    mean_report = faithfulness_eval(model, test_half, implets,
                                    RemovalSpec(kind=KIND_MEAN, seed=0),
                                    random_trials=10)
    assert mean_report.delta >= 0.30, f"mean_fill delta {mean_report.delta:.3f}"

    single = faithfulness_eval(model, test_half, implets,
                               RemovalSpec(kind=KIND_SMOOTH, seed=0),
                               random_trials=10)
    multi = faithfulness_eval(model, test_half, implets,
                              RemovalSpec(kind=KIND_SMOOTH, multi=True, seed=0),
                              random_trials=10)
    assert multi.drop_identified >= single.drop_identified - 0.05, (
        f"multi {multi.drop_identified:.3f} vs single "
        f"{single.drop_identified:.3f}")
    budget.announce(f"mean_fill delta={mean_report.delta:.3f}, multi drop="
                    f"{multi.drop_identified:.3f} vs single "
                    f"{single.drop_identified:.3f}")


def test_cils_pipeline():
    budget = Budget("CILS held-out pipeline", 600.0)
    deltas = {MODE_VALUES: [], MODE_VALUES_ATTR: [], "implets": []}
    ratios = []
    for seed in range(5):
        ds = generate(SynthSpec(seed=seed))
        train_half, eval_half = split_half(ds, seed=seed)
        model = train_builtin(train_half, KIND_LINEAR, TRAIN)
        cparams = ClusterParams(k_max=4, repeats=3, seed=0)
        removal = RemovalSpec(kind=KIND_SMOOTH, seed=0)
        c1, i1 = cils_eval(model, eval_half, AttributionConfig(**OCCLUSION),
                           IMPLET_PARAMS, cparams, removal, mode=MODE_VALUES)
        c2, _ = cils_eval(model, eval_half, AttributionConfig(**OCCLUSION),
                          IMPLET_PARAMS, cparams, removal,
                          mode=MODE_VALUES_ATTR)
        deltas[MODE_VALUES].append(c1.delta)
        deltas[MODE_VALUES_ATTR].append(c2.delta)
        deltas["implets"].append(i1.delta)
        ratios.append(c1.drop_identified / i1.drop_identified)

    assert min(ratios) >= 0.5, f"CILS/implet drop ratio fell to {min(ratios):.2f}"
    m1 = float(np.mean(deltas[MODE_VALUES]))
    m2 = float(np.mean(deltas[MODE_VALUES_ATTR]))
    mi = float(np.mean(deltas["implets"]))
    assert m1 <= m2 + 0.05, f"ordering broke: 1d {m1:.3f} vs 2d {m2:.3f}"
    assert m2 <= mi + 0.05, f"ordering broke: 2d {m2:.3f} vs implets {mi:.3f}"
    budget.announce(f"min ratio {min(ratios):.2f}; mean deltas "
                    f"{m1:.3f} <= {m2:.3f} <= {mi:.3f} (slack 0.05)")


# --- CLI determinism ---

CLI = [sys.executable, "-m", "impletkit"]


def _config_of(path: Path) -> dict:
    return json.loads(path.read_text())["config"]


def _argv_from_config(config: dict) -> list[str]:
    """Rebuild the exact command line from an embedded config block."""
    args = CLI + ["--seed", str(config["seed"]), config["command"]]
    for key, value in config.items():
        if key in ("command", "seed") or value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                args.append(flag)
        else:
            args.extend([flag, str(value)])
    return args


def test_cli_determinism(tmp_path):
    budget = Budget("CLI byte determinism", 300.0)
    paths = {
        "synth": tmp_path / "synth.tsv",
        "train": tmp_path / "model.json",
        "attribute": tmp_path / "attr.json",
        "extract": tmp_path / "implets.json",
        "cluster": tmp_path / "cohorts.json",
        "eval": tmp_path / "report.json",
    }
    first = [
        ["--seed", "0", "synth", "--n-per-class", "15", "--length", "48",
         "--out", str(paths["synth"])],
        ["--seed", "0", "train", "--data", str(paths["synth"]),
         "--out", str(paths["train"])],
        ["--seed", "0", "attribute", "--data", str(paths["synth"]),
         "--model", str(paths["train"]), "--out", str(paths["attribute"])],
        ["--seed", "0", "extract", "--data", str(paths["synth"]),
         "--attr", str(paths["attribute"]), "--out", str(paths["extract"])],
        ["--seed", "0", "cluster", "--implets", str(paths["extract"]),
         "--k-max", "3", "--repeats", "2", "--out", str(paths["cluster"])],
        ["--seed", "0", "eval", "--data", str(paths["synth"]),
         "--model", str(paths["train"]), "--implets", str(paths["extract"]),
         "--removal", "smooth", "--random-trials", "3",
         "--out", str(paths["eval"])],
    ]
    for argv in first:
        proc = subprocess.run(CLI + argv, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr

    outputs = {
        "synth": [paths["synth"], Path(str(paths["synth"]) + ".meta.json")],
        "train": [paths["train"]],
        "attribute": [paths["attribute"]],
        "extract": [paths["extract"]],
        "cluster": [paths["cluster"]],
        "eval": [paths["eval"], Path(str(paths["eval"]) + ".csv")],
    }
    config_files = {
        "synth": Path(str(paths["synth"]) + ".meta.json"),
        "train": paths["train"],
        "attribute": paths["attribute"],
        "extract": paths["extract"],
        "cluster": paths["cluster"],
        "eval": paths["eval"],
    }

    snapshots = {cmd: [p.read_bytes() for p in files]
                 for cmd, files in outputs.items()}
    for cmd, config_file in config_files.items():
        argv = _argv_from_config(_config_of(config_file))
        proc = subprocess.run(argv, capture_output=True, text=True)
        assert proc.returncode == 0, f"{cmd} rerun failed: {proc.stderr}"
        for path, before in zip(outputs[cmd], snapshots[cmd]):
            assert path.read_bytes() == before, (
                f"{cmd} rerun changed {path.name}")
    budget.announce("all 6 commands byte-stable under embedded-config rerun")


# --- secondary component ---

ADAPTER_MAIN = REPO / "adapter" / "dist" / "main.js"


def test_adapter_conformance(tmp_path):
    budget = Budget("adapter protocol conformance", 60.0)
    node = shutil.which("node")
    if node is None or not ADAPTER_MAIN.exists():
        pytest.skip("adapter not built or node unavailable")

    rng = np.random.default_rng(4)
    rows = rng.normal(0, 1, (30, 16))
    labels = [0] * 15 + [1] * 15
    rows[15:] += 1.5
    from conftest import make_dataset
    ds = make_dataset(rows, labels)
    model = train_builtin(ds, KIND_LINEAR)
    model_path = tmp_path / "model.json"
    save_model(model, model_path)

    proc = subprocess.Popen([node, str(ADAPTER_MAIN), str(model_path)],
                            stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                            text=True)

    def ask(payload: str) -> dict:
        proc.stdin.write(payload + "\n")
        proc.stdin.flush()
        return json.loads(proc.stdout.readline())

    try:
        info = ask(json.dumps({"id": 0, "op": "info"}))
        assert info == {"id": 0, "n_classes": 2, "input_length": 16}

        # fault injection: malformed line answered with an error object,
        # connection stays alive
        bad = ask("this is not json")
        assert "error" in bad
        follow = ask(json.dumps({"id": 1, "op": "info"}))
        assert follow["id"] == 1 and follow["n_classes"] == 2

        unknown = ask(json.dumps({"id": 2, "op": "mystery"}))
        assert unknown["id"] == 2 and "error" in unknown

        # numeric conformance on 100 random inputs
        batch = rng.normal(0, 1, (100, 16))
        reply = ask(json.dumps({"id": 3, "op": "predict_proba",
                                "series": batch.tolist()}))
        got = np.asarray(reply["proba"])
        want = predict_proba(model, batch)
        assert got.shape == (100, 2)
        assert np.allclose(got.sum(axis=1), 1.0, atol=1e-6)
        max_err = float(np.abs(got - want).max())
        assert max_err < 1e-6, f"adapter diverged by {max_err:.2e}"
    finally:
        proc.stdin.close()
        proc.wait(timeout=5)
    budget.announce(f"fault injection ok, 100-input max error {max_err:.1e}")
