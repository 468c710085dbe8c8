# Copyright (C) 2021 posecast contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
# SPDX-License-Identifier: Apache-2.0
# License-Filename: LICENSE

"""This module tests the ``posecast`` command line end to end."""

import json

import numpy as np
import pytest

from posecast.cli import EXIT_FAILURE, EXIT_OK, EXIT_VALIDATION, main
from posecast.forecaster import is_forecast_file, iter_forecasts, load_forecaster
from posecast.metrics import (
    JointScoreParams,
    action_eval,
    held_out_split,
    pose_features,
    sequence_pose_eval,
    validate_report,
)
from posecast.pose_data import load_clips, save_posemap_png, synth_render_triples
from posecast.pose_training import read_loss_curve


def _json(path):
    with open(path) as f:
        return json.load(f)


def test_synth_writes_clips_and_manifest(run, workdir):
    """Test clip generation and its manifest."""
    assert run("synth", "--out", "clips.jsonl", "--count", "3") == EXIT_OK
    clips = load_clips(workdir / "clips.jsonl")
    assert [c.clip_id for c in clips] == ["synth-0", "synth-1", "synth-2"]
    assert clips[0].num_persons == 4
    manifest = _json(workdir / "clips.jsonl.manifest.json")
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 0
    assert manifest["count"] == 3
    assert len(manifest["config_digest"]) == 64
    assert "sha256" in manifest


def test_synth_is_reproducible(run, workdir):
    """Test that equal seeds write identical files."""
    run("synth", "--out", "a.jsonl", "--count", "2")
    run("synth", "--out", "b.jsonl", "--count", "2")
    run("--seed", "5", "synth", "--out", "c.jsonl", "--count", "2")
    a = (workdir / "a.jsonl").read_bytes()
    assert a == (workdir / "b.jsonl").read_bytes()
    assert a != (workdir / "c.jsonl").read_bytes()


def test_synth_triples(run, workdir):
    """Test writing rendering triples."""
    assert run("synth", "--triples", "--out", "triples", "--count", "3") == EXIT_OK
    lines = (workdir / "triples" / "index.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert (workdir / "triples.manifest.json").exists()


def test_invalid_override_exits_with_validation_code(run, capsys):
    """Test that a malformed override exits with code 2."""
    assert run("--set", "train.lr", "synth", "--out", "x.jsonl") == EXIT_VALIDATION
    assert "posecast: error:" in capsys.readouterr().err


def test_invalid_synth_settings(run):
    """Test that an impossible scene exits with code 2."""
    code = run("--set", "synth.num_groups=9", "synth", "--out", "x.jsonl")
    assert code == EXIT_VALIDATION


def test_stage2_without_checkpoint(run):
    """Test that stage 2 without --init-from exits with code 2."""
    run("synth", "--out", "clips.jsonl", "--count", "2")
    code = run("train-pose", "--clips", "clips.jsonl", "--out", "m.zip", "--stage", "2")
    assert code == EXIT_VALIDATION


def test_missing_input_is_a_failure(run, capsys):
    """Test that an unreadable input exits with code 3."""
    assert run("train-pose", "--clips", "missing.jsonl", "--out", "m.zip") == EXIT_FAILURE
    assert "posecast: failure:" in capsys.readouterr().err


def test_unknown_command():
    """Test that argparse rejects unknown sub-commands."""
    with pytest.raises(SystemExit) as excinfo:
        main(["bogus"])
    assert excinfo.value.code == 2


def test_filter_can_remove_every_clip(run):
    """Test that filtering below the default target count leaves no clips."""
    run("synth", "--out", "clips.jsonl", "--count", "2")
    code = run("train-pose", "--clips", "clips.jsonl", "--out", "m.zip", "--filter")
    assert code == EXIT_VALIDATION


def test_pose_pipeline(run, workdir):
    """Test synth, both training stages, forecasting and evaluation."""
    assert run("synth", "--out", "clips.jsonl", "--count", "3") == EXIT_OK
    assert (
        run(
            "train-pose", "--clips", "clips.jsonl", "--out", "s1.zip",
            "--max-iterations", "2",
        )
        == EXIT_OK
    )
    assert len(read_loss_curve(workdir / "s1.zip.loss.csv")) == 2
    assert _json(workdir / "s1.zip.manifest.json")["stage"] == 1
    assert (
        run(
            "train-pose", "--clips", "clips.jsonl", "--out", "s2.zip", "--stage", "2",
            "--init-from", "s1.zip", "--max-iterations", "1",
        )
        == EXIT_OK
    )
    _, extra = load_forecaster(workdir / "s2.zip")
    assert extra["stage"] == 2

    assert (
        run(
            "forecast", "--clips", "clips.jsonl", "--checkpoint", "s2.zip",
            "--out", "forecast.json", "--posemaps",
        )
        == EXIT_OK
    )
    assert is_forecast_file(workdir / "forecast.json")
    posemap = workdir / "forecast_posemaps" / "synth-0" / "person_0" / "posemap_001.png"
    assert posemap.exists()

    mismatch = run(
        "forecast", "--clips", "clips.jsonl", "--checkpoint", "s2.zip",
        "--out", "other.json", "--model", "vanilla",
    )
    assert mismatch == EXIT_VALIDATION

    assert (
        run(
            "eval", "--pred", "forecast.json", "--ref", "clips.jsonl",
            "--out", "report.json", "--csv", "report.csv",
        )
        == EXIT_OK
    )
    report = _json(workdir / "report.json")
    validate_report(report)
    assert [s["step"] for s in report["pose"]["steps"]] == [1, 2]
    assert (workdir / "report.csv").read_text().startswith("section,step,metric,value")

    assert (
        run("eval", "--pred", "clips.jsonl", "--ref", "clips.jsonl", "--out", "self.json")
        == EXIT_OK
    )
    perfect = _json(workdir / "self.json")["pose"]
    assert perfect["mean_mse"] == 0.0
    assert perfect["mean_joint_score"] == 1.0

    assert (
        run(
            "eval", "--mode", "action", "--pred", "forecast.json",
            "--ref", "clips.jsonl", "--out", "action.json",
        )
        == EXIT_OK
    )
    action = _json(workdir / "action.json")["action"]
    assert 0.0 <= action["accuracy"] <= 1.0


def test_resume_appends_curve(run, workdir):
    """Test that a resumed run continues the loss curve."""
    run("synth", "--out", "clips.jsonl", "--count", "3")
    args = ["train-pose", "--clips", "clips.jsonl", "--out", "m.zip"]
    assert run(*args, "--max-iterations", "1") == EXIT_OK
    assert run(*args, "--resume", "m.zip") == EXIT_OK
    rows = read_loss_curve(workdir / "m.zip.loss.csv")
    assert [r["iteration"] for r in rows] == [0, 1]


def test_baseline_models(run, workdir):
    """Test training and forecasting with both baselines."""
    run("synth", "--out", "clips.jsonl", "--count", "2")
    for name in ("vanilla", "social"):
        ckpt = f"{name}.zip"
        assert (
            run(
                "train-pose", "--clips", "clips.jsonl", "--out", ckpt,
                "--model", name, "--max-iterations", "1",
            )
            == EXIT_OK
        )
        model, _ = load_forecaster(workdir / ckpt)
        assert not model.config.refine
        assert (
            run(
                "forecast", "--clips", "clips.jsonl", "--checkpoint", ckpt,
                "--out", f"{name}.json", "--model", name,
            )
            == EXIT_OK
        )
        assert _json(workdir / f"{name}.json")["model"] == name


def test_render_pipeline(run, workdir):
    """Test renderer training, rendering forecasts and image evaluation."""
    assert run("synth", "--triples", "--out", "triples", "--count", "4") == EXIT_OK
    assert (
        run(
            "train-render", "--triples", "triples/index.jsonl", "--out", "r.zip",
            "--iterations", "1",
        )
        == EXIT_OK
    )
    assert (workdir / "r.zip.loss.csv").exists()
    assert _json(workdir / "r.zip.manifest.json")["updates"] == 3

    run("synth", "--out", "clips.jsonl", "--count", "1")
    run("train-pose", "--clips", "clips.jsonl", "--out", "m.zip", "--max-iterations", "1")
    run("forecast", "--clips", "clips.jsonl", "--checkpoint", "m.zip", "--out", "f.json")

    render_args = [
        "render", "--forecast", "f.json", "--references", "refs",
        "--checkpoint", "r.zip", "--out", "frames",
    ]
    assert run(*render_args) == EXIT_VALIDATION

    triples = synth_render_triples(4, 32, 0)
    for person_id, triple in enumerate(triples):
        target = workdir / "refs" / "synth-0" / f"person_{person_id}.png"
        target.parent.mkdir(parents=True, exist_ok=True)
        save_posemap_png(triple.reference, target)
    assert run(*render_args) == EXIT_OK
    frames = sorted((workdir / "frames").rglob("*.png"))
    assert len(frames) == 4 * 2
    assert _json(workdir / "frames.manifest.json")["frames"] == 8

    assert (
        run(
            "eval", "--mode", "image", "--pred", "frames", "--ref", "frames",
            "--out", "image.json",
        )
        == EXIT_OK
    )
    image = _json(workdir / "image.json")["image"]
    assert image == {"mse": 0.0, "psnr": "inf"}
    assert np.isfinite(_json(workdir / "r.zip.manifest.json")["gamma"])


def test_invalid_utf8_clip_file_is_a_validation_error(run, workdir, capsys):
    """Test that undecodable clip bytes exit with code 2 and name the line."""
    run("synth", "--out", "clips.jsonl", "--count", "1")
    with open(workdir / "clips.jsonl", "ab") as f:
        f.write(b"\xff\xfe\n")
    code = run("train-pose", "--clips", "clips.jsonl", "--out", "m.zip")
    assert code == EXIT_VALIDATION
    assert "clips.jsonl:2:" in capsys.readouterr().err


def _outputs(workdir):
    return {
        p.relative_to(workdir).as_posix(): p.read_bytes()
        for p in sorted(workdir.rglob("*"))
        if p.is_file() and p.suffix != ".log"
    }


def _full_run(run):
    steps = [
        ["synth", "--out", "clips.jsonl", "--count", "3"],
        ["synth", "--triples", "--out", "triples", "--count", "2"],
        ["train-pose", "--clips", "clips.jsonl", "--out", "s1.zip",
         "--max-iterations", "2"],
        ["train-pose", "--clips", "clips.jsonl", "--out", "s2.zip", "--stage", "2",
         "--init-from", "s1.zip", "--max-iterations", "1"],
        ["forecast", "--clips", "clips.jsonl", "--checkpoint", "s2.zip",
         "--out", "forecast.json", "--posemaps"],
        ["eval", "--pred", "forecast.json", "--ref", "clips.jsonl",
         "--out", "report.json", "--csv", "report.csv"],
        ["eval", "--mode", "action", "--pred", "forecast.json", "--ref", "clips.jsonl",
         "--out", "action.json"],
        ["train-render", "--triples", "triples/index.jsonl", "--out", "r.zip",
         "--iterations", "1"],
    ]
    for step in steps:
        assert run(*step) == EXIT_OK, step


def test_commands_are_byte_reproducible(run, workdir):
    """Test that repeating every command with the same seed rewrites equal bytes."""
    _full_run(run)
    first = _outputs(workdir)
    _full_run(run)
    second = _outputs(workdir)
    assert "s2.zip" in first and "r.zip" in first
    assert any(name.startswith("forecast_posemaps/") for name in first)
    assert sorted(first) == sorted(second)
    for name, data in first.items():
        assert second[name] == data, name


def test_eval_matches_metric_functions(run, workdir):
    """Test that evaluation reports equal direct calls to the metric functions."""
    _full_run(run)
    refs = load_clips(workdir / "clips.jsonl")
    records = iter_forecasts(workdir / "forecast.json")
    preds = {r["clip_id"]: np.asarray(r["poses"]) for r in records}
    table = sequence_pose_eval(
        [preds[c.clip_id] for c in refs],
        [np.stack([t.joints[c.T1 :] for t in c.tracks]) for c in refs],
        JointScoreParams(),
        [np.stack([t.visibility[c.T1 :] for t in c.tracks]) for c in refs],
    )
    pose = _json(workdir / "report.json")["pose"]
    assert pose["mean_mse"] == pytest.approx(table.mean_mse, rel=1e-12)
    assert pose["mean_joint_score"] == pytest.approx(table.mean_joint_score, rel=1e-12)
    for row, step in zip(pose["steps"], table.steps):
        assert row["step"] == step.step
        assert row["mse"] == pytest.approx(step.mse, rel=1e-12)
        assert row["joint_score"] == pytest.approx(step.joint_score, rel=1e-12)

    train_ids, test_ids = held_out_split([c.clip_id for c in refs], seed=0)
    by_id = {c.clip_id: c for c in refs}
    fit_x = [t.joints for i in train_ids for t in by_id[i].tracks]
    fit_y = [y for i in train_ids for y in by_id[i].labels]
    held_x = [
        np.concatenate([t.joints[: by_id[i].T1], preds[i][k]])
        for i in test_ids
        for k, t in enumerate(by_id[i].tracks)
    ]
    held_y = [y for i in test_ids for y in by_id[i].labels]
    direct = action_eval(
        pose_features(np.stack(fit_x)),
        fit_y,
        pose_features(np.stack(held_x)),
        held_y,
        seed=0,
    )
    action = _json(workdir / "action.json")["action"]
    assert action["accuracy"] == pytest.approx(direct.accuracy, rel=1e-12)
    assert action["majority_class"] == direct.majority_class
    assert action["confusion"] == direct.confusion


def test_action_eval_train_and_test_clips_are_disjoint(run, workdir):
    """Test the separate classifier-training input and its overlap check."""
    run("synth", "--out", "clips.jsonl", "--count", "2")
    run("--seed", "100", "synth", "--out", "real.jsonl", "--count", "2")
    run("train-pose", "--clips", "clips.jsonl", "--out", "m.zip", "--max-iterations", "1")
    run("forecast", "--clips", "clips.jsonl", "--checkpoint", "m.zip", "--out", "f.json")
    args = ["eval", "--mode", "action", "--pred", "f.json", "--ref", "clips.jsonl"]
    assert run(*args, "--out", "a.json", "--action-train", "real.jsonl") == EXIT_OK
    action = _json(workdir / "a.json")["action"]
    assert sum(map(sum, action["confusion"])) == 2 * 4
    overlap = run(*args, "--out", "b.json", "--action-train", "clips.jsonl")
    assert overlap == EXIT_VALIDATION
    assert not (workdir / "b.json").exists()
