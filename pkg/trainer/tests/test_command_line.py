"""Exercising the nabtrain command line."""
import json

import numpy as np

from boxcert.datasets import load_trajectories as verifier_load

from nabtrain.cli import main
from nabtrain.weights import import_network


def test_gen_data_writes_verifier_readable_file(tmp_path, capsys):
    out = str(tmp_path / "quad.txt")
    rc = main(["gen-data", "--system", "quadratic", "--trajectories", "5",
               "--steps", "4", "--dt", "0.02", "--out", out])
    assert rc == 0
    data, dt = verifier_load(out)
    assert data.shape == (5, 5, 2)
    assert dt == 0.02
    assert "wrote 5 trajectories" in capsys.readouterr().out


def test_train_zero_iterations_exports(tmp_path, capsys):
    out = str(tmp_path / "wt.json")
    rc = main(["train", "--system", "water_tank", "--hidden", "4",
               "--iterations", "0", "--out", out])
    assert rc == 0
    assert import_network(out)[0].in_features == 1
    assert "held-out" in capsys.readouterr().out


def test_unknown_system_fails(tmp_path, capsys):
    rc = main(["train", "--system", "warp_drive", "--iterations", "0",
               "--out", str(tmp_path / "x.json")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_distill_requires_domain_or_system(tmp_path, capsys):
    teacher = str(tmp_path / "t.json")
    json.dump({"version": 1, "n": 1, "m": 1,
               "layers": [{"weight": [[2.0]], "bias": [0.0],
                           "activation": "identity"}]},
              open(teacher, "w"))
    rc = main(["distill", "--teacher", teacher, "--iterations", "0",
               "--out", str(tmp_path / "s.json")])
    assert rc == 1

    rc = main(["distill", "--teacher", teacher, "--domain", "-1:1",
               "--hidden", "3", "--iterations", "0",
               "--out", str(tmp_path / "s.json")])
    assert rc == 0


def test_distill_rejects_mismatched_domain(tmp_path, capsys):
    teacher = str(tmp_path / "t.json")
    json.dump({"version": 1, "n": 2, "m": 1,
               "layers": [{"weight": [[1.0, 1.0]], "bias": [0.0],
                           "activation": "identity"}]},
              open(teacher, "w"))
    rc = main(["distill", "--teacher", teacher, "--domain", "-1:1",
               "--hidden", "3", "--iterations", "0",
               "--out", str(tmp_path / "s.json")])
    assert rc == 1
    assert "expects 2 inputs" in capsys.readouterr().err


def test_config_system_round_trip(tmp_path):
    cfg = {"name": "cubic", "state": ["u"], "outputs": ["u^3 - 0.5*u"],
           "domain": [[-2.0, 2.0]]}
    path = tmp_path / "cubic.json"
    path.write_text(json.dumps(cfg))
    out = str(tmp_path / "cubic_net.json")
    rc = main(["train", "--system", str(path), "--hidden", "6",
               "--iterations", "0", "--out", out])
    assert rc == 0
    net = import_network(out)
    assert net[0].in_features == 1
