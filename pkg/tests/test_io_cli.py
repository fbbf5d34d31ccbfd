import os
import struct

import numpy as np
import pytest

from nordvlasov.cli import main
from nordvlasov.errors import SnapshotFormatError
from nordvlasov.io import (GRID_NAMES, read_snapshot, snapshot_of, write_csv, write_snapshot)
from nordvlasov.kinetic import Simulation

SMALL = """\
x_min = -8
x_max = 8
nx = 128
t_final = 0.3
n_sample_x = 250
n_sample_p = 4
profile = gaussian-bump
"""


@pytest.fixture
def small_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


@pytest.fixture
def state(small_cfg, bump_data):
    sim = Simulation(small_cfg, bump_data)
    sim.advance()
    return sim.advance()


def test_snapshot_round_trip_is_bitwise(state, tmp_path):
    path = tmp_path / "s.nvkn"
    write_snapshot(path, state)
    back = read_snapshot(path)
    assert back == snapshot_of(state)
    assert back.t == state.t
    assert np.array_equal(back.particles[:, 0], state.ens.x)
    assert np.array_equal(back.grids["psi"], state.slice.psi)
    assert os.path.getsize(path) == struct.calcsize("<4sIdQddQQ") + 8 * (
        len(GRID_NAMES) * state.slice.nx + 7 * len(state.ens))


def test_snapshot_rejects_other_versions(state, tmp_path):
    path = tmp_path / "s.nvkn"
    write_snapshot(path, state)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack("<I", 2)
    path.write_bytes(bytes(raw))
    with pytest.raises(SnapshotFormatError, match="version"):
        read_snapshot(path)


def test_snapshot_rejects_bad_magic_and_truncation(state, tmp_path):
    path = tmp_path / "s.nvkn"
    write_snapshot(path, state)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(SnapshotFormatError):
        read_snapshot(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(SnapshotFormatError, match="magic"):
        read_snapshot(path)
    path.write_bytes(raw[:10])
    with pytest.raises(SnapshotFormatError):
        read_snapshot(path)


def test_csv_floats_round_trip_exactly(tmp_path):
    vals = [0.1, 1 / 3, 2.0**-1074, 1e308, -0.0]
    path = tmp_path / "t.csv"
    write_csv(path, ["name", "v"], [("a", v) for v in vals])
    lines = path.read_text().splitlines()
    assert lines[0] == "name,v"
    assert [float(ln.split(",")[1]) for ln in lines[1:]] == vals


def test_run_vacuum_exits_zero(tmp_path, capsys):
    cfg = tmp_path / "vac.cfg"
    cfg.write_text("nx = 64\nx_min = -8\nx_max = 8\nt_final = 0.3\nprofile = vacuum\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "diagnostics.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_run_rejects_a_cfl_violation(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(SMALL + "dt = 0.5\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "Cfl" in capsys.readouterr().err


def test_run_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nxx = 12\n")
    assert main(["run", "--config", str(cfg)]) == 2


def test_run_output_is_bitwise_reproducible(small_file, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["run", "--config", small_file, "--out", str(out),
                     "--threads", "1", "--snapshot-stride", "2"]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()
    snaps = sorted(p.name for p in a.glob("snap_*.nvkn"))
    assert snaps and snaps[0] == "snap_000000.nvkn"
    for name in snaps:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "diagnostics.csv").read_text().splitlines()[0].split(",")
    assert {"t", "mass_particle", "casimir_exact_q2", "energy_residual"} <= set(header)


def test_verify_flow_with_no_fields(tmp_path):
    assert main(["verify-flow", "--fields", "", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "flowcheck.csv").read_text().startswith("check,field,q,t")


def test_verify_flow_wrong_exponent_fails(tmp_path, capsys):
    assert main(["verify-flow", "--fields", "linear-time", "--out", str(tmp_path)]) == 0
    assert main(["verify-flow", "--fields", "linear-time", "--out", str(tmp_path),
                 "--jacobian-exponent", "2"]) == 1
    assert "FAIL  jacobian" in capsys.readouterr().out


def test_verify_flow_unknown_field(tmp_path):
    assert main(["verify-flow", "--fields", "nope", "--out", str(tmp_path)]) == 2


def test_ladder_needs_two_rungs(small_file, tmp_path):
    assert main(["ladder", "--config", small_file, "--n", "8", "--out", str(tmp_path)]) == 2
    assert main(["ladder", "--config", small_file, "--n", "8,x", "--out", str(tmp_path)]) == 2


def test_ladder_small(small_file, tmp_path, capsys):
    assert main(["ladder", "--config", small_file, "--n", "2,4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ladder.csv").exists()
    assert "energy bound uniform" in capsys.readouterr().out


def test_schema_lists_every_key(capsys):
    assert main(["print-config-schema"]) == 0
    out = capsys.readouterr().out
    for key in ("x_min", "nx", "cfl", "mollifier_n", "threads", "profile"):
        assert key in out


def test_bad_thread_count():
    assert main(["run", "--threads", "0"]) == 2
