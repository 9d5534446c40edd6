import json

import numpy as np
import pytest

from misspec.data import Dataset, DatasetFormatError
from misspec.ode import OdeParams, solve_richards
from misspec.synthdata import (
    FIG1_REPLICATES,
    SCENARIOS,
    dhat_eq8,
    generate,
    make_fig1,
    make_fig3,
    make_fig4,
    observation_times,
)


def test_dhat_normalisation_and_initial_value():
    assert dhat_eq8(10.0) == pytest.approx(1.0, rel=1e-15)
    # 0.1 / (1000/1003 + 0.1)
    assert dhat_eq8(0.0) == pytest.approx(0.1 / (1000 / 1003 + 0.1), rel=1e-14)
    assert dhat_eq8(0.0) == pytest.approx(0.09116, abs=5e-6)


def test_dhat_transition_near_cube_root_of_three():
    t = np.linspace(0, 10, 10_001)
    slope = np.gradient(dhat_eq8(t), t)
    # steepest rise of t^3 / (t^3 + 3) is at t = (3/2)^(1/3), of order 3^(1/3)
    assert t[np.argmax(slope)] == pytest.approx(1.5 ** (1 / 3), abs=1e-3)
    assert dhat_eq8(3 ** (1 / 3)) == pytest.approx((0.5 + 0.1) / (1000 / 1003 + 0.1), rel=1e-12)


def test_schedule_is_eleven_uniform_days():
    np.testing.assert_array_equal(observation_times(), np.arange(11.0))


@pytest.mark.parametrize("sid", ["fig1", "fig3_ic1", "fig4_ic2", "table1_N5"])
def test_same_seed_is_bit_identical(sid):
    a, b = generate(sid, 7), generate(sid, 7)
    np.testing.assert_array_equal(a.value, b.value)
    np.testing.assert_array_equal(a.time, b.time)
    assert a.metadata == b.metadata
    assert not np.array_equal(a.value, generate(sid, 8).value)


def test_csv_bytes_are_identical_across_runs(tmp_path):
    for k in (1, 2):
        generate("fig3_ic1", 1).to_csv(tmp_path / f"d{k}.csv")
    assert (tmp_path / "d1.csv").read_bytes() == (tmp_path / "d2.csv").read_bytes()


def test_fig3_schedule_and_truth():
    ds = make_fig3(1, seed=1)
    assert len(ds) == 5 * 11
    truth = ds.metadata["truth"]
    assert (truth["r"], truth["K"], truth["sigma"]) == (1.0, 5e-3, 1e-4)
    assert truth["u0"] / truth["K"] == pytest.approx(0.1)
    assert make_fig3(2, 1).metadata["truth"]["u0"] / 5e-3 == pytest.approx(0.5)


def test_fig3_residuals_are_noise_at_sigma():
    ds = make_fig3(2, seed=4)
    truth = ds.metadata["truth"]
    u = solve_richards(OdeParams(truth["r"], truth["K"], truth["u0"]), 2.0, ds.time)
    z = (ds.value - u) / truth["sigma"]
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert 0.6 < z.std() < 1.4


def test_fig1_members_and_echo():
    ds = make_fig1(0)
    members = ds.metadata["members"]
    assert sorted(members) == ["fig1_u0_K10", "fig1_u0_K2", "fig1_u0_K20", "fig1_u0_K4"]
    for sid, meta in members.items():
        assert meta["truth"]["beta"] == 2.0
        assert meta["truth"]["u0"] == pytest.approx(meta["u0_fraction"] * 5e-3)
        assert len(ds.select(scenario_id=sid)) == FIG1_REPLICATES * 11
    u = solve_richards(OdeParams(1.0, 5e-3, 2.5e-3), 2.0, np.linspace(0, 10, 101))
    assert np.all(np.diff(u) > 0) and u[-1] < 5e-3


def test_fig4_initial_overall_density_equal_between_scratches():
    a, b = make_fig4(1, seed=0), make_fig4(2, seed=0)
    assert a.metadata["truth"]["U0"] == pytest.approx(b.metadata["truth"]["U0"], rel=0.02)
    assert (a.metadata["pde"]["ic"]["alpha1"], a.metadata["pde"]["ic"]["alpha2"]) == (0.3, 0.7)
    assert (a.metadata["truth"]["u0"], b.metadata["truth"]["u0"]) == (4e-4, 3e-4)
    assert a.kinds == ["U"]


def test_table1_record_counts_scale_with_replicates():
    n5 = generate("table1_N5", 0)
    n200 = generate("table1_N200", 0)
    assert len(n200) == 40 * len(n5)
    for ic in (1, 2):
        assert len(n5.select(scenario_id=f"table1_N5_ic{ic}")) == 5 * 11


def test_fig5_observes_both_statistics(tmp_path):
    ds = generate("fig5", 0)
    assert sorted(ds.kinds) == ["F", "U"]
    truth = ds.metadata["truth"]
    assert truth["D"] == 300.0 and truth["sigma2"] == pytest.approx(10.0)
    assert truth["dhat"]["values"][-1] == 1.0
    ds.to_csv(tmp_path / "fig5.csv")
    back = Dataset.from_csv(tmp_path / "fig5.csv")
    np.testing.assert_array_equal(back.value, ds.value)
    assert back.metadata == json.loads(json.dumps(ds.metadata))


def test_every_scenario_generates():
    for sid in SCENARIOS:
        if sid in ("table1_N100", "table1_N200", "fig5", "fig1"):
            continue
        ds = generate(sid, 0)
        assert len(ds) > 0 and ds.metadata["seed"] == 0


def test_unknown_scenario_lists_valid_ids():
    with pytest.raises(KeyError, match="fig3_ic1"):
        generate("fig9", 0)


def test_malformed_csv_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    generate("fig3_ic1", 0).to_csv(path)
    lines = path.read_text().splitlines()
    lines[4] = lines[4].replace(lines[4].split(",")[-1], "oops")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match=r"bad.csv:5: "):
        Dataset.from_csv(path)
