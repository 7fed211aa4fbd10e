import os
import numpy as np
import pytest
from dataclasses import replace

from barrierflow.cli import (
    CliError,
    ConvergenceReport,
    ParseError,
    ValidationError,
    atomic_write,
    compare_effectiveness,
    main,
    parse_config,
    vee_from_linear,
)
from conftest import config_path


def test_parse_linear_config():
    cfg = parse_config(config_path("linear_overtopping.ini"))
    assert cfg.barrier_vertices == [(0.0, 0.3), (1.0, 0.653)]
    assert cfg.beta == 1.5
    assert cfg.depth == 1.2
    assert cfg.dam_height == 2.0
    assert cfg.dam_side == "below"
    assert cfg.bc_top == "extrapolation"
    assert cfg.gauges == [(0.5, 0.8), (0.5, 0.39)]


def test_parse_unknown_key_reports_line(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nnx = 10\nny = 10\nnz = 3\n")
    with pytest.raises(ParseError) as e:
        parse_config(str(p))
    assert "nz" in str(e.value)
    assert "4" in str(e.value)  # line number


def test_parse_unknown_section(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nnx = 10\nny = 10\n[physics]\ng = 9.81\n")
    with pytest.raises(ParseError):
        parse_config(str(p))


def test_missing_beta_is_validation_error(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nnx = 10\nny = 10\n"
                 "[barrier]\nvertices = 0,0.3; 1,0.653\n")
    with pytest.raises(ValidationError) as e:
        parse_config(str(p))
    assert "beta" in str(e.value)


def test_gauge_outside_domain(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nnx = 10\nny = 10\n[output]\ngauges = 1.5,0.5\n")
    with pytest.raises(ValidationError) as e:
        parse_config(str(p))
    assert "gauge" in str(e.value)


def test_atomic_write(tmp_path):
    p = tmp_path / "out" / "file.txt"
    os.makedirs(p.parent, exist_ok=True)
    atomic_write(str(p), "hello\n")
    assert p.read_text() == "hello\n"
    assert not any(f.name.startswith(".") for f in p.parent.iterdir()
                   if f.name != "file.txt")


def test_vee_from_linear():
    v = vee_from_linear([(0.0, 0.3), (1.0, 0.653)])
    assert v[0] == (0.0, 0.653)
    assert v[2] == (1.0, 0.653)
    assert abs(v[1][0] - 0.5) < 1e-15
    assert v[1][1] < 0.653


def test_report_csv_order_self_consistency(tmp_path):
    errors = np.array([[0.08], [0.02], [0.005]])
    grids = [10, 20, 40]
    ratios = np.full_like(errors, np.nan)
    orders = np.full_like(errors, np.nan)
    for a in range(1, 3):
        ratios[a] = errors[a - 1] / errors[a]
        orders[a] = np.log(ratios[a]) / np.log(grids[a] / grids[a - 1])
    rep = ConvergenceReport(grids=grids, gauges=[(0.5, 0.5)], errors=errors,
                            ratios=ratios, orders=orders,
                            reference_kind="mapped", reference_n=100,
                            sample_times=[0.0, 0.1])
    csv = rep.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "grid,dx,gauge,l1_error,ratio,order"
    # re-derive the order from the emitted errors
    rows = [l.split(",") for l in lines[1:]]
    e10, e20 = float(rows[0][3]), float(rows[1][3])
    order = np.log(e10 / e20) / np.log(2.0)
    assert abs(order - float(rows[1][5])) < 1e-9


def test_cli_run_writes_outputs(tmp_path):
    p = tmp_path / "tiny.ini"
    p.write_text(
        "[grid]\nnx = 12\nny = 12\n"
        "[barrier]\nvertices = 0,0.3; 1,0.653\nbeta = 1.5\n"
        "[initial]\ndepth = 1.2\ndam_height = 2.0\ndam_side = below\n"
        "dam_y = 0.2\n"
        "[output]\nt_end = 0.05\ngauges = 0.5,0.8\nsnapshots = 0.02\n")
    out = tmp_path / "out"
    rc = main(["run", str(p), "--out", str(out)])
    assert rc == 0
    gfile = out / "gauge_00.csv"
    assert gfile.exists()
    assert gfile.read_text().splitlines()[0] == "t,h,hu,hv"
    assert (out / "stats.txt").exists()
    snaps = list(out.glob("snapshot_t*.csv"))
    assert len(snaps) == 1


def test_cli_geometry_dump(tmp_path):
    out = tmp_path / "geo"
    rc = main(["geometry", config_path("linear_overtopping.ini"),
               "--out", str(out)])
    assert rc == 0
    txt = (out / "geometry.txt").read_text()
    assert txt.startswith("# i j alpha_up alpha_lo")


def test_cli_error_exit_code(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nnx = 10\nny = 10\nbogus = 1\n")
    rc = main(["run", str(p), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_compare_requires_island():
    cfg = parse_config(config_path("linear_overtopping.ini"))
    with pytest.raises(ValidationError):
        compare_effectiveness(cfg)
