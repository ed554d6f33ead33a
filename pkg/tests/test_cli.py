import json

import numpy as np
import pytest

from lyapmotion import cli, demogen, envs, geometry, lyapnet


@pytest.fixture()
def tiny_scene_file(tmp_path):
    payload = geometry.ConvexHull(
        np.array([[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]]))
    scene = envs.Scene(name="tiny", dim=2, obstacles=(), robot_links=(payload,),
                       goal=np.array([0.5, 0.5]),
                       pos_lower=np.array([-1.5, -1.5]), pos_upper=np.array([1.5, 1.5]),
                       vel_lower=np.array([-2.0, -2.0]), vel_upper=np.array([2.0, 2.0]),
                       d_safe=0.05)
    path = tmp_path / "tiny.json"
    envs.save_scene(scene, path)
    return path


def test_unknown_flag_exits_2(tiny_scene_file):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gen-demos", "--scene", str(tiny_scene_file), "--bogus", "1"])
    assert exc.value.code == 2


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2


def test_stage_seeds_differ():
    assert cli.stage_seed(7, "demogen") != cli.stage_seed(7, "train")
    assert cli.stage_seed(7, "train") == cli.stage_seed(7, "train")


def test_gen_demos_writes_dataset_and_manifest(tiny_scene_file, tmp_path):
    out = tmp_path / "out" / "ds.jsonl"
    rc = cli.main(["gen-demos", "--scene", str(tiny_scene_file), "--grid", "3,3",
                   "--seed", "4", "--out", str(out)])
    assert rc == 0
    assert out.exists()
    ds = demogen.load_dataset(out)
    assert len(ds.demos) >= 7
    manifest = out.parent / cli.MANIFEST_NAME
    records = [json.loads(line) for line in manifest.read_text().splitlines()]
    assert records[0]["command"] == "gen-demos"
    assert str(out) in records[0]["outputs"]


def test_gen_demos_deterministic_bytes(tiny_scene_file, tmp_path):
    outs = []
    for run in range(2):
        out = tmp_path / f"run{run}" / "ds.jsonl"
        cli.main(["gen-demos", "--scene", str(tiny_scene_file), "--grid", "3,3",
                  "--seed", "4", "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_train_rollout_eval_chain(tiny_scene_file, tmp_path):
    ds_path = tmp_path / "ds.jsonl"
    cli.main(["gen-demos", "--scene", str(tiny_scene_file), "--grid", "4,4",
              "--seed", "4", "--out", str(ds_path)])
    model_path = tmp_path / "model.json"
    rc = cli.main(["train", "--data", str(ds_path), "--scene", str(tiny_scene_file),
                   "--arch", "2,16,16,1", "--epochs", "200", "--seed", "4",
                   "--out", str(model_path)])
    assert rc == 0
    model = lyapnet.load_model(model_path)
    assert lyapnet.lyapunov_value(model, model.goal) == 0.0

    roll_path = tmp_path / "roll.csv"
    rc = cli.main(["rollout", "--scene", str(tiny_scene_file), "--model", str(model_path),
                   "--start=-1.0,-1.0", "--out", str(roll_path), "--dt", "0.03"])
    assert rc == 0
    assert roll_path.read_text().startswith("step,x0,x1,V,min_sd")

    report_path = tmp_path / "report.json"
    rc = cli.main(["eval", "--model", str(model_path), "--scene", str(tiny_scene_file),
                   "--data", str(ds_path), "--baseline", "--out", str(report_path),
                   "--dt", "0.03"])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert set(report) == {"model", "baseline", "model_better"}
    assert 0.0 <= report["model"]["reach_rate"] <= 1.0


def test_export_field_row_count(tiny_scene_file, tmp_path):
    ds_path = tmp_path / "ds.jsonl"
    cli.main(["gen-demos", "--scene", str(tiny_scene_file), "--grid", "3,3",
              "--seed", "4", "--out", str(ds_path)])
    model_path = tmp_path / "model.json"
    cli.main(["train", "--data", str(ds_path), "--scene", str(tiny_scene_file),
              "--arch", "2,8,1", "--epochs", "5", "--seed", "4", "--out", str(model_path)])
    field_path = tmp_path / "field.csv"
    rc = cli.main(["export-field", "--scene", str(tiny_scene_file),
                   "--model", str(model_path), "--grid", "12,11",
                   "--out", str(field_path)])
    assert rc == 0
    lines = field_path.read_text().strip().splitlines()
    assert len(lines) == 12 * 11 + 1


def test_stage_failure_exits_1(tiny_scene_file, tmp_path):
    rc = cli.main(["gen-demos", "--scene", str(tiny_scene_file), "--grid", "2,2",
                   "--seed", "1", "--out", str(tmp_path / "x.jsonl"),
                   "--start-region", "10,10,11,11"])
    assert rc == 1
