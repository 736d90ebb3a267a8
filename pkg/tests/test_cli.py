import json

import numpy as np
import pytest

from boxcert.cli import exit_code_for, koopman_step_network, load_koopman, main
from boxcert.dynamics import DynamicalSystem
from boxcert.dynamics.config import save_system
from boxcert.geometry import Hyperrectangle
from boxcert.network import IDENTITY, RELU, Network, make_layer, save_weights


@pytest.fixture
def lin_fixture(tmp_path):
    """Exact affine pair plus a shifted variant: f = 2x on [-1, 1]."""
    dom = Hyperrectangle.from_bounds([-1.0], [1.0])
    sys = DynamicalSystem("lin2x", 1, ["2*x0"], dom, default_epsilon=1e-6)
    cfg = tmp_path / "lin.json"
    save_system(sys, cfg)
    exact = tmp_path / "exact.json"
    save_weights(Network([make_layer(np.array([[2.0]]))]), exact)
    shifted = tmp_path / "shifted.json"
    save_weights(Network([make_layer(np.array([[2.0]]), np.array([0.2]))]),
                 shifted)
    return cfg, exact, shifted


def test_verify_certifies_exact_net(lin_fixture, tmp_path, capsys):
    cfg, exact, _ = lin_fixture
    report = tmp_path / "report.json"
    regions = tmp_path / "regions.txt"
    rc = main(["verify", "--config", str(cfg), "--weights", str(exact),
               "--report", str(report), "--regions", str(regions)])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["certified_fraction"] == 1.0
    assert doc["splits"] == 0
    assert regions.exists()
    out = capsys.readouterr().out
    assert "lin2x" in out and "100.00" in out


def test_verify_reports_counterexamples(lin_fixture, capsys):
    cfg, _, shifted = lin_fixture
    rc = main(["verify", "--config", str(cfg), "--weights", str(shifted),
               "--epsilon", "0.1"])
    assert rc == 2
    out = capsys.readouterr().out
    assert "counterexample" in out


def test_verify_unknown_exit_code(tmp_path):
    # a hopeless epsilon with no split budget leaves only unknown boxes
    dom = Hyperrectangle.from_bounds([0.0], [2.0])
    sys = DynamicalSystem("sq", 1, ["x0^2"], dom, default_epsilon=0.1)
    cfg = tmp_path / "sq.json"
    save_system(sys, cfg)
    w = tmp_path / "w.json"
    save_weights(Network([make_layer(np.array([[2.0]]), np.array([-1.0]))]), w)
    rc = main(["verify", "--config", str(cfg), "--weights", str(w),
               "--epsilon", "1e-4", "--max-depth", "0", "--quiet"])
    assert rc == 3


def test_verify_usage_errors(lin_fixture, tmp_path):
    cfg, exact, _ = lin_fixture
    # no such file
    assert main(["verify", "--config", str(cfg),
                 "--weights", str(tmp_path / "nope.json")]) == 1
    # unknown builtin
    assert main(["verify", "--system", "perpetuum_mobile",
                 "--weights", str(exact), "--epsilon", "0.1"]) == 1
    # dimension mismatch between system and net
    wide = tmp_path / "wide.json"
    save_weights(Network([make_layer(np.array([[1.0, 1.0]]))]), wide)
    assert main(["verify", "--system", "water_tank",
                 "--weights", str(wide), "--epsilon", "0.1"]) == 1
    # both --system and --config
    assert main(["verify", "--system", "water_tank", "--config", str(cfg),
                 "--weights", str(exact), "--epsilon", "0.1"]) == 1


def test_verify_teacher_student_mode(tmp_path, rng):
    from tests.conftest import random_network

    teacher = random_network(rng, [2, 6, 2])
    tpath = tmp_path / "teacher.json"
    save_weights(teacher, tpath)
    spath = tmp_path / "student.json"
    save_weights(teacher, spath)
    rc = main(["verify", "--teacher-weights", str(tpath),
               "--weights", str(spath), "--domain=-0.1:0.1,-0.1:0.1",
               "--epsilon", "0.2", "--quiet"])
    assert rc == 0


def test_sweep_brackets_the_floor(lin_fixture, tmp_path):
    cfg, _, shifted = lin_fixture
    report = tmp_path / "sweep.json"
    rc = main(["sweep", "--config", str(cfg), "--weights", str(shifted),
               "--epsilon-lo", "0.01", "--epsilon-hi", "1.0",
               "--report", str(report), "--quiet"])
    assert rc == 0
    doc = json.loads(report.read_text())
    # the true floor is 0.2; the relative tolerance keeps the answer within
    # five percent above it
    assert 0.2 < doc["smallest_certified_epsilon"] <= 0.21
    assert doc["largest_uncertified_probe"] < doc["smallest_certified_epsilon"]


def test_sweep_returns_lo_when_it_certifies(lin_fixture, tmp_path):
    cfg, exact, _ = lin_fixture
    report = tmp_path / "sweep.json"
    rc = main(["sweep", "--config", str(cfg), "--weights", str(exact),
               "--epsilon-lo", "0.001", "--epsilon-hi", "1.0",
               "--report", str(report), "--quiet"])
    assert rc == 0
    assert json.loads(report.read_text())["smallest_certified_epsilon"] == 0.001


def test_sweep_requires_certifiable_hi(lin_fixture):
    cfg, _, shifted = lin_fixture
    rc = main(["sweep", "--config", str(cfg), "--weights", str(shifted),
               "--epsilon-lo", "0.01", "--epsilon-hi", "0.1", "--quiet"])
    assert rc == 1


def test_export_writes_regions(lin_fixture, tmp_path):
    cfg, exact, _ = lin_fixture
    out = tmp_path / "reg.txt"
    rc = main(["export", "--config", str(cfg), "--weights", str(exact),
               "--regions", str(out), "--quiet"])
    assert rc == 0
    assert out.read_text().startswith("# boxcert-regions 1 ")


def test_plot_data_lists_rectangles(lin_fixture, tmp_path):
    cfg, _, shifted = lin_fixture
    regions = tmp_path / "reg.txt"
    main(["verify", "--config", str(cfg), "--weights", str(shifted),
          "--epsilon", "0.1", "--regions", str(regions), "--quiet"])
    out = tmp_path / "plot.txt"
    rc = main(["plot-data", str(regions), "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    kinds = {ln.split()[0] for ln in lines}
    assert kinds <= {"certified", "falsified", "unknown", "witness"}
    assert "falsified" in kinds and "witness" in kinds


def test_plot_data_rejects_high_dimension(tmp_path):
    dom = Hyperrectangle.from_bounds([0.0] * 3, [1.0] * 3)
    sys = DynamicalSystem("l3", 3, ["x0", "x1", "x2"], dom)
    cfg = tmp_path / "l3.json"
    save_system(sys, cfg)
    w = tmp_path / "w.json"
    save_weights(Network([make_layer(np.eye(3))]), w)
    regions = tmp_path / "reg.txt"
    main(["verify", "--config", str(cfg), "--weights", str(w),
          "--epsilon", "0.1", "--regions", str(regions), "--quiet"])
    assert main(["plot-data", str(regions)]) == 1


# --- koopman mode -----------------------------------------------------------


@pytest.fixture
def koopman_fixture(tmp_path, rng):
    enc = Network([
        make_layer(rng.normal(size=(4, 2)) * 0.3, rng.normal(size=4) * 0.1, RELU),
        make_layer(rng.normal(size=(3, 4)) * 0.3, rng.normal(size=3) * 0.1),
    ])
    k = Network([make_layer(np.eye(3) * 0.9)])
    dec = Network([
        make_layer(rng.normal(size=(4, 3)) * 0.3, rng.normal(size=4) * 0.1, RELU),
        make_layer(rng.normal(size=(2, 4)) * 0.3, rng.normal(size=2) * 0.1),
    ])
    save_weights(enc, tmp_path / "enc.json")
    save_weights(k, tmp_path / "k.json")
    save_weights(dec, tmp_path / "dec.json")
    meta = {
        "format": "boxcert-koopman",
        "encoder": "enc.json",
        "k_matrix": "k.json",
        "decoder": "dec.json",
        "horizon": 5,
        "dt": 0.1,
        "mu": -0.05,
        "lambda": -1.0,
        "domain": [[-1.0, 1.0], [-1.0, 1.0]],
        "epsilon": 0.1,
    }
    mp = tmp_path / "meta.json"
    mp.write_text(json.dumps(meta))
    return mp


def test_koopman_chain_matches_manual_composition(koopman_fixture, rng):
    enc, k, dec, meta = load_koopman(koopman_fixture)
    net = koopman_step_network(enc, k, dec, 3)
    x = rng.uniform(-1, 1, size=(20, 2))
    want = dec.forward(k.forward(k.forward(k.forward(enc.forward(x)))))
    np.testing.assert_allclose(net.forward(x), want, atol=1e-12)


def test_koopman_verify_all_steps(koopman_fixture, tmp_path):
    report = tmp_path / "rep.json"
    regions = tmp_path / "reg.txt"
    rc = main(["verify", "--koopman", str(koopman_fixture),
               "--epsilon", "1e6", "--steps", "1,3,5",
               "--report", str(report), "--regions", str(regions), "--quiet"])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["kind"] == "koopman"
    assert set(doc["steps"]) == {"1", "3", "5"}
    for t in (1, 3, 5):
        assert (tmp_path / f"reg.txt.step{t}").exists()


def test_koopman_counterexample_exit(koopman_fixture):
    rc = main(["verify", "--koopman", str(koopman_fixture),
               "--epsilon", "1e-9", "--steps", "1", "--max-depth", "3",
               "--quiet"])
    assert rc in (2, 3)


def test_koopman_rejects_steps_outside_horizon(koopman_fixture):
    rc = main(["verify", "--koopman", str(koopman_fixture),
               "--steps", "9", "--quiet"])
    assert rc == 1


def test_koopman_rejects_wrong_format(tmp_path):
    bad = tmp_path / "meta.json"
    bad.write_text('{"format": "something-else"}')
    assert main(["verify", "--koopman", str(bad), "--quiet"]) == 1


# --- exit code mapping -------------------------------------------------------


def test_exit_code_mapping(lin_fixture):
    from boxcert.partitioner import PartitionConfig, verify_domain
    from boxcert.verifier import AnalyticRef
    from boxcert.dynamics.config import load_system
    from boxcert.network import load_weights

    cfg, exact, shifted = lin_fixture
    sys = load_system(cfg)
    ref = AnalyticRef(sys)
    good = verify_domain(ref, load_weights(exact), sys.domain, 1e-9,
                         PartitionConfig())
    assert exit_code_for(good) == 0
    bad = verify_domain(ref, load_weights(shifted), sys.domain, 0.1,
                        PartitionConfig())
    assert exit_code_for(bad) == 2
    gap = verify_domain(ref, load_weights(shifted), sys.domain, 0.2,
                        PartitionConfig(max_depth=0))
    assert exit_code_for(gap) == 3
