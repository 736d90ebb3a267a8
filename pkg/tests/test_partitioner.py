import numpy as np
import pytest

from boxcert.dynamics import DynamicalSystem, get_system
from boxcert.errors import ConfigError, NoAdmissibleAxisError
from boxcert.geometry import Hyperrectangle, total_volume
from boxcert.network import Network, make_layer
from boxcert.partitioner import (
    CERTIFIED,
    FALSIFIED,
    UNKNOWN,
    CoverageReport,
    PartitionConfig,
    choose_split_axis,
    export_regions,
    initial_partition,
    load_regions,
    verify_domain,
)
from boxcert.verifier import REMAINDER, RESIDUAL, AnalyticRef


def affine_pair():
    sys = DynamicalSystem("lin", 1, ["2*x0"],
                          Hyperrectangle.from_bounds([-1.0], [1.0]))
    net = Network([make_layer(np.array([[2.0]]))])
    return sys, net


def square_pair(shift=0.0):
    sys = DynamicalSystem("sq", 1, ["x0^2"],
                          Hyperrectangle.from_bounds([0.0], [1.0]))
    net = Network([make_layer(np.array([[1.0]]), np.array([shift - 0.25]))])
    return sys, net


# --- initial partition -----------------------------------------------------


def test_initial_partition_grid_counts():
    dom = Hyperrectangle.from_bounds([0.0, 0.0], [1.0, 2.0])
    cells = initial_partition(dom, (2, 3))
    assert len(cells) == 6
    assert abs(total_volume(cells) - dom.volume()) < 1e-12
    # row-major: the second axis varies fastest
    assert cells[0].lo.tolist() == [0.0, 0.0]
    assert cells[1].lo.tolist() == [0.0, 2.0 / 3.0]
    assert cells[3].lo.tolist() == [0.5, 0.0]


def test_initial_partition_exact_edges():
    dom = Hyperrectangle.from_bounds([0.1], [0.7])
    a, b, c = initial_partition(dom, (3,))
    assert a.lo[0] == 0.1 and c.hi[0] == 0.7
    assert a.hi[0] == b.lo[0] and b.hi[0] == c.lo[0]


def test_initial_partition_default_grid():
    small = Hyperrectangle.from_bounds([0.0] * 3, [1.0] * 3)
    assert len(initial_partition(small)) == 8
    big = Hyperrectangle.from_bounds([0.0] * 4, [1.0] * 4)
    assert len(initial_partition(big)) == 1


def test_initial_partition_degenerate_axis():
    dom = Hyperrectangle.from_bounds([0.0, 1.0], [1.0, 1.0])
    cells = initial_partition(dom, (2, 2))
    assert len(cells) == 2  # the flat axis cannot be subdivided


@pytest.mark.parametrize("grid", [0, (2, 0), (2,), "three"])
def test_initial_partition_rejects_bad_grid(grid):
    dom = Hyperrectangle.from_bounds([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        initial_partition(dom, grid)


# --- split axis choice -------------------------------------------------------


def test_affine_output_has_no_remainder_axis():
    # output 1 of the jet engine is affine; a remainder split can never
    # tighten it, so no axis is admissible
    je = get_system("jet_engine")
    with pytest.raises(NoAdmissibleAxisError):
        choose_split_axis(AnalyticRef(je), 1, je.domain, reason=REMAINDER)


def test_remainder_splits_restricted_to_nonlinear_axes():
    je = get_system("jet_engine")
    # output 0 is nonlinear in x0 only
    for depth in (0, 1, 2):
        axis = choose_split_axis(AnalyticRef(je), 0, je.domain,
                                 reason=REMAINDER, depth=depth)
        assert axis == 0


def test_round_robin_every_fourth_depth():
    je = get_system("jet_engine")
    ref = AnalyticRef(je)
    assert choose_split_axis(ref, 0, je.domain, reason=REMAINDER, depth=3) == 0
    assert choose_split_axis(ref, 0, je.domain, reason=REMAINDER, depth=7) == 1


def test_residual_reason_considers_every_axis():
    je = get_system("jet_engine")
    axis = choose_split_axis(AnalyticRef(je), 1, je.domain, reason=RESIDUAL)
    assert axis in (0, 1)


def test_curvature_probe_prefers_the_nonlinear_axis():
    # output 0 of this system bends only along x1
    ex = get_system("exponential")
    axis = choose_split_axis(AnalyticRef(ex), 0, ex.domain, reason=REMAINDER)
    assert axis == 1


def test_min_width_blocks_all_axes():
    je = get_system("jet_engine")
    with pytest.raises(NoAdmissibleAxisError):
        choose_split_axis(AnalyticRef(je), 0, je.domain,
                          reason=REMAINDER, min_width=10.0)


# --- verify_domain: terminal behavior ---------------------------------------


def test_full_certification_exact_affine():
    sys, net = affine_pair()
    report = verify_domain(AnalyticRef(sys), net, sys.domain, 1e-9,
                           PartitionConfig())
    assert report.certified_fraction == 1.0
    assert report.boxes_checked == 2
    assert report.splits == 0
    assert not report.early_stopped
    assert report.validate()
    for rec in report.records:
        assert rec.status == CERTIFIED


def test_counterexamples_reported_and_confirmed():
    sys, net = square_pair(shift=0.4)  # N = x + 0.15, off by up to 0.4
    report = verify_domain(AnalyticRef(sys), net, sys.domain, 0.1,
                           PartitionConfig())
    assert report.counterexamples
    assert report.certified_fraction < 1.0
    for x, j, err in report.counterexamples:
        resid = abs(float(sys.evaluate(x[None, :])[0, j] - net.forward(x)[j]))
        assert resid == err
        assert err > 0.1
    assert report.validate()


def test_unknown_when_depth_exhausted():
    sq = DynamicalSystem("sq", 1, ["x0^2"],
                         Hyperrectangle.from_bounds([0.0], [2.0]))
    net = Network([make_layer(np.array([[2.0]]), np.array([-1.0]))])
    report = verify_domain(AnalyticRef(sq), net, sq.domain, 1e-6,
                           PartitionConfig(max_depth=2))
    assert report.unknown_boxes
    assert report.certified_fraction < 1.0
    assert report.validate()
    assert all(r.status in (CERTIFIED, UNKNOWN) for r in report.records)


def test_records_tile_domain_per_output():
    je = get_system("jet_engine")
    net = Network([make_layer(np.zeros((2, 2)), np.zeros(2))])
    report = verify_domain(AnalyticRef(je), net, je.domain, 0.5,
                           PartitionConfig(max_depth=4))
    report.validate()
    for j in (0, 1):
        boxes = [r.box for r in report.records if r.j == j]
        assert abs(total_volume(boxes) - je.domain.volume()) < 1e-9


def test_determinism_and_worker_independence():
    sys, net = square_pair(shift=0.3)
    cfg1 = PartitionConfig(seed=11, max_depth=6)
    cfg2 = PartitionConfig(seed=11, max_depth=6, workers=2)
    a = verify_domain(AnalyticRef(sys), net, sys.domain, 0.05, cfg1)
    b = verify_domain(AnalyticRef(sys), net, sys.domain, 0.05, cfg1)
    c = verify_domain(AnalyticRef(sys), net, sys.domain, 0.05, cfg2)
    assert a.signature() == b.signature()
    assert a.signature() == c.signature()
    assert c.workers == 2


def test_seed_changes_sampled_witnesses():
    sys, net = square_pair(shift=0.3)
    a = verify_domain(AnalyticRef(sys), net, sys.domain, 0.05,
                      PartitionConfig(seed=0, max_depth=3))
    b = verify_domain(AnalyticRef(sys), net, sys.domain, 0.05,
                      PartitionConfig(seed=999, max_depth=3))
    assert a.seed != b.seed
    # statuses agree; the witness points may differ
    assert [r.status for r in a.records] == [r.status for r in b.records]


def test_stop_on_first_counterexample():
    sys, net = square_pair(shift=0.4)
    report = verify_domain(AnalyticRef(sys), net, sys.domain, 0.1,
                           PartitionConfig(stop_on_first_counterexample=True))
    assert report.early_stopped
    assert len(report.counterexamples) >= 1
    # the frontier is drained into unknown records, never dropped
    report.validate()
    assert any(r.status == UNKNOWN for r in report.records) or len(
        report.records
    ) == len([r for r in report.records if r.status != UNKNOWN])


def test_time_budget_definitely_terminates():
    lz = get_system("lorenz")
    net = Network([make_layer(np.zeros((3, 3)), np.zeros(3))])
    report = verify_domain(AnalyticRef(lz), net, lz.domain, 1e-9,
                           PartitionConfig(time_budget=0.5))
    assert report.early_stopped
    report.validate()


def test_trace_splits_records_axes():
    sq = DynamicalSystem("sq", 1, ["x0^2"],
                         Hyperrectangle.from_bounds([0.0], [2.0]))
    net = Network([make_layer(np.array([[2.0]]), np.array([-1.0]))])
    report = verify_domain(AnalyticRef(sq), net, sq.domain, 0.05,
                           PartitionConfig(max_depth=8, trace_splits=True))
    assert report.split_log
    for j, depth, axis, reason in report.split_log:
        assert j == 0 and axis == 0
        assert reason in (REMAINDER, RESIDUAL)


def test_config_validation():
    sys, net = affine_pair()
    ref = AnalyticRef(sys)
    with pytest.raises(ConfigError):
        verify_domain(ref, net, sys.domain, 0.1, PartitionConfig(workers=0))
    with pytest.raises(ConfigError):
        verify_domain(ref, net, sys.domain, -0.5, PartitionConfig())
    with pytest.raises(ConfigError):
        verify_domain(ref, net, sys.domain, 0.1, PartitionConfig(max_depth=-1))
    with pytest.raises(ConfigError):
        verify_domain(ref, net, sys.domain, 0.1, PartitionConfig(time_budget=0))
    with pytest.raises(ConfigError):
        verify_domain(ref, net, sys.domain, 0.1, PartitionConfig(min_width=-1.0))


# --- region files ------------------------------------------------------------


def test_region_file_round_trip(tmp_path):
    sys, net = square_pair(shift=0.4)
    report = verify_domain(AnalyticRef(sys), net, sys.domain, 0.1,
                           PartitionConfig(max_depth=5))
    p = tmp_path / "regions.txt"
    export_regions(report, p)
    records, meta = load_regions(p)
    assert meta["n"] == 1
    assert meta["outputs"] == 1
    assert meta["epsilon"] == 0.1
    assert meta["domain"] == sys.domain
    assert len(records) == len(report.records)
    for got, want in zip(records, sorted(report.records, key=lambda r: r.sort_key())):
        assert got.status == want.status
        assert got.box == want.box
        if want.witness is not None:
            assert got.witness == want.witness
            assert got.error == want.error


def test_region_file_header_and_rows(tmp_path):
    sys, net = affine_pair()
    report = verify_domain(AnalyticRef(sys), net, sys.domain, 1e-9,
                           PartitionConfig())
    p = tmp_path / "regions.txt"
    export_regions(report, p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# boxcert-regions 1 ")
    assert lines[1].startswith("# domain ")
    body = [ln for ln in lines if not ln.startswith("#")]
    assert all(ln.split()[0] == "certified" for ln in body)


@pytest.mark.parametrize(
    "mangle",
    [
        lambda lines: ["# wrong header"] + lines[1:],
        lambda lines: lines + ["certified 0 not_a_number 1.0"],
        lambda lines: lines + ["certified 5 0.0 1.0"],
        lambda lines: lines + ["mystery 0 0.0 1.0"],
    ],
)
def test_load_regions_rejects_malformed(tmp_path, mangle):
    sys, net = affine_pair()
    report = verify_domain(AnalyticRef(sys), net, sys.domain, 1e-9,
                           PartitionConfig())
    p = tmp_path / "regions.txt"
    export_regions(report, p)
    from boxcert.errors import ParseError

    p.write_text("\n".join(mangle(p.read_text().splitlines())) + "\n")
    with pytest.raises(ParseError):
        load_regions(p)
