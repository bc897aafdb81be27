import os
from pathlib import Path

import pytest

import bljust

CONFIGS = Path(os.environ.get("BLJ_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))

TINY = """
[model]
hidden = 4
[data]
input_dim = 4
num_classes = 3
n_labeled = 30
n_unlabeled = 50
batch_size = 8
[strategy]
kind = bljust
epochs = 3
explore_steps = 2
joint_steps = 2
finetune_steps = 3
value_budget = 5
"""


def test_splitmix_reference_values():
    assert bljust.splitmix64(0, 2) == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]
    assert bljust.splitmix64(1234567, 3) == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
    ]


def test_penalty_schedule():
    assert bljust.penalty_at(0.2, 100, 1) == 0.0
    assert bljust.penalty_at(0.2, 100, 2) == 0.002
    assert bljust.penalty_at(0.2, 100, 100, ramp_to_max=True) == 0.2
    with pytest.raises(ValueError):
        bljust.penalty_at(0.2, 100, 101)


def test_penalized_argmin():
    theta, phi, eta = bljust.quad_penalized_argmin(1, 2, 3, -1, 1.0)
    assert (theta, phi, eta) == (2.0, 2.0, -1.0)


def test_config_errors_become_value_errors():
    with pytest.raises(bljust.ConfigError, match="line 2"):
        bljust.config("[model]\nwidth = 3\n")


def test_run_quadratic_config_file():
    out = bljust.run(CONFIGS / "quadratic.ini")
    assert out["strategy"] == "bljust"
    assert out["oracle_gap"] <= 0.05
    assert len(out["params"]["values"]) == 3
    assert out["trace"][-1]["phase"] == "finetune"


def test_run_is_deterministic_and_seedable():
    a = bljust.run(TINY, seed=3)
    b = bljust.run(TINY, seed=3)
    c = bljust.run(TINY, seed=4)
    assert a["params"]["values"] == b["params"]["values"]
    assert a["params"]["values"] != c["params"]["values"]
    assert a["config"]["strategy"]["seed"] == 3


def test_compare_and_ablate_shapes():
    ptft = TINY.replace("kind = bljust", "kind = ptft\npretrain_epochs = 2\nfinetune_epochs = 2")
    cells = bljust.compare([TINY, ptft], seeds=2)
    assert [c["label"] for c in cells] == ["bljust", "bljust", "ptft", "ptft"]
    assert all(c["ok"] for c in cells)
    variants = [c["label"] for c in bljust.ablate(TINY)]
    assert variants == ["full", "no_finetune", "no_explore", "neither"]


def test_generate():
    d = bljust.generate(TINY)
    assert len(d["labeled_x"]) == 30
    assert len(d["unlabeled_truth"]) == 50
    assert bljust.generate(TINY) == d


def test_verify_oracle():
    report = bljust.verify("oracle")
    assert report["pass"] is True
