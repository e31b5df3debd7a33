# Copyright 2026 The SQWA Lab Authors
# Licensed under the Apache License, Version 2.0

import math
import pathlib

import numpy as np
import pytest

import sqwa

TINY = pathlib.Path(__file__).resolve().parents[1] / "data" / "tiny_blobs.json"


def test_level_arithmetic():
    assert [sqwa.levels_count(b) for b in range(1, 6)] == [2, 3, 7, 15, 31]
    assert [sqwa.effective_bits(n) for n in (3, 7, 15, 31)] == [3, 4, 5, 6]


def test_quantize_ternary():
    w = np.array([[0.24, 0.26], [-0.76, 3.0]])
    q = sqwa.quantize(w, bits=2, step=0.5)
    assert q.shape == w.shape
    np.testing.assert_array_equal(q, [[0.0, 0.5], [-0.5, 0.5]])
    assert sqwa.quantize_levels(w, 2, 0.5) == [0, 1, -1, 1]
    np.testing.assert_array_equal(sqwa.quantize(q, 2, 0.5), q)


def test_step_size_is_scale_equivariant():
    rng = np.random.default_rng(3)
    w = rng.normal(size=500)
    step = sqwa.select_step_size(w, 2)
    assert step > 0
    assert math.isclose(sqwa.select_step_size(4.0 * w, 2), 4.0 * step, rel_tol=1e-5)


def test_schedules():
    hi, lo = sqwa.derive_cycle_bounds([0.1, 0.01, 0.001])
    assert math.isclose(hi, 0.01) and math.isclose(lo, 1e-4)
    lrs = sqwa.cyclical_learning_rates(0.01, 1e-4, 6, 1, 12)
    assert len(lrs) == 12 and lrs[0] == pytest.approx(0.01) and lrs[5] == pytest.approx(1e-4)
    assert sqwa.capture_epochs(0.01, 1e-4, 6, 1, 18) == [5, 11, 17]
    assert sqwa.finetune_learning_rates(1e-3, 3) == pytest.approx([1e-3, 1e-4, 1e-5])


def test_errors_carry_a_code():
    with pytest.raises(sqwa.SqwaError) as info:
        sqwa.derive_cycle_bounds([0.1])
    assert info.value.code == "degenerate input"


def test_tiny_pipeline(tmp_path):
    cfg = sqwa.load_config(TINY)
    assert cfg["retrain"]["max_lr"] == pytest.approx(0.01)
    report = sqwa.run_pipeline(TINY, output_dir=tmp_path / "run")
    labels = [row["label"] for row in report["rows"]]
    assert labels[-3:] == ["Avg. (3-bit)", "Direct (2-bit)", "Fine-tune (2-bit)"]
    final = pathlib.Path(report["output_dir"]) / "finetune" / "final"
    m = sqwa.evaluate_checkpoint(TINY, final, "train")
    assert m == pytest.approx(report["rows"][-1]["train"], rel=1e-12)
    again = sqwa.run_pipeline(TINY, output_dir=tmp_path / "run")
    assert again["rows"] == report["rows"]
