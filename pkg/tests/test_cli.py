import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostcorr import cli
from ghostcorr.config import ArmSpec, ConfigError, RunConfig, parse_config, parse_config_text, to_ini
from ghostcorr.output import read_pgm
from ghostcorr.validation import CheckResult


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SMALL = """
[run]
realizations = 400
[scan]
points = 24
"""


# parsing -----------------------------------------------------------------------


def test_empty_file_gives_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, ""))
    assert cfg == RunConfig()
    assert cfg.N == 2 and cfg.preset == "double-slit" and cfg.mode == "simulate"
    system = cfg.system()
    assert system.arm(2).z_r1 == pytest.approx(0.2)


def test_reference_block_count():
    text = "[run]\norder = 5\n" + "".join(f"[ref.{r}]\nz_r0 = 0.3\n" for r in (2, 3, 4))
    with pytest.raises(ConfigError, match="expected 4 reference arms"):
        parse_config_text(text)


def test_pole_is_a_config_error():
    with pytest.raises(ConfigError, match="pole"):
        parse_config_text("[ref]\nz_r1 = 0.1\nf_r = 0.1\n")


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r":3: unknown key 'colour'"):
        parse_config_text("[run]\nseed = 1\ncolour = red\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[lens]\nf = 1\n")


@pytest.mark.parametrize("text,needle", [
    ("[run]\nseed = many\n", "seed"),
    ("[run]\nmode = paint\n", "mode"),
    ("[run]\nrealizations = 10\n", "realizations"),
    ("[run]\norder = 1\n", "order"),
    ("[source]\nshape = square\n", "shape"),
    ("[object]\npreset = point\nseparation = 1e-3\n", "separation"),
    ("[scan]\narms = 3\n", "arms"),
    ("[sweep]\nqa = 1\n", "qa"),
    ("[run]\nmode = simulate\n[run]\nseed = 2\n", "already exists"),
])
def test_schema_violations(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config_text(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.ini")


def test_reference_overrides_inherit_defaults():
    cfg = parse_config_text("[run]\norder = 3\n[ref]\nf_r = 0.1\n[ref.2]\nz_r0 = 0.3\n[ref.3]\nz_r0 = 0.15\n")
    arms = cfg.reference_arms()
    assert [a.z_r1 for a in arms] == pytest.approx([0.2, -0.1])


def test_round_trip_of_defaults_and_overrides():
    text = ("[run]\norder = 3\nmode = analytic\n[object]\npreset = grayscale\nlevels = 1, 0.5\n"
            "[ref.2]\nz_r0 = 0.3\n[ref.3]\nz_r1 = 0.25\n[sweep]\nqa = \n")
    cfg = parse_config_text(text)
    assert parse_config_text(to_ini(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    level=st.floats(0.1, 10),
    bandwidth=st.floats(1e3, 1e5),
    N=st.integers(2, 5),
    z_r0=st.floats(0.25, 1.0),
    threads=st.integers(1, 8),
    det=st.booleans(),
)
def test_round_trip_property(seed, level, bandwidth, N, z_r0, threads, det):
    cfg = RunConfig(seed=seed, level=level, bandwidth=bandwidth, N=N, threads=threads, deterministic=det,
                    refs=tuple(ArmSpec(z_r0 + 0.01 * i, None, 0.1) for i in range(N - 1)))
    assert parse_config_text(to_ini(cfg)) == cfg


# runs ------------------------------------------------------------------------


def test_simulate_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["--config", str(write(tmp_path, SMALL)), "--out", str(out), "--quiet"])
    assert code == 0
    rows = read_csv(out / "profile_arm2.csv")
    assert rows[0] == ["x_r", "G", "std_error", "background"]
    assert len(rows) == 25
    assert all(float(v) == float(v) for v in rows[1])
    assert (out / "profile_arm2_analytic.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert parse_config_text(summary["config"]) == with_out(parse_config_text(SMALL), out)
    derived = summary["derived"]
    assert derived["arms"][0]["kind"] == "real"
    assert derived["arms"][0]["magnification"] == pytest.approx(-1.0)
    assert "chi" in derived and "I1" in derived
    vis = summary["visibility"]
    assert vis["bound"] == 0.5 and vis["physical"]
    assert summary["monte_carlo"]["background_ratio"] == pytest.approx(1.0, abs=0.1)


def with_out(cfg, out):
    from dataclasses import replace

    return replace(cfg, output=str(out))


def test_flags_override_file(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, "[run]\nseed = 1\nmode = simulate\nrealizations = 300\n[scan]\npoints = 8\n")
    assert cli.main(["--config", str(cfg), "--mode", "analytic", "--seed", "9", "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    echoed = parse_config_text(summary["config"])
    assert echoed.mode == "analytic" and echoed.seed == 9
    assert summary["method"].startswith("analytic")


def test_deterministic_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL)
    outs = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"r{i}"
        assert cli.main(["--config", str(cfg), "--seed", "4", "--threads", threads, "--deterministic",
                         "--out", str(out), "--quiet"]) == 0
        outs.append({p.name: p.read_bytes() for p in out.glob("*.csv")})
    assert outs[0] == outs[1] and len(outs[0]) == 2


def test_classify_all_real_case(tmp_path):
    text = "[run]\nmode = classify\norder = 4\n[ref]\nz_r0 = 0.3\nf_r = 0.1\n"
    out = tmp_path / "c"
    assert cli.main(["--config", str(write(tmp_path, text)), "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["classification"] == ["real", "real", "real"]


def test_visibility_sweep_csv(tmp_path):
    text = "[run]\nmode = visibility-sweep\n[object]\npreset = point\n[sweep]\nqa = 1, 5\n"
    out = tmp_path / "v"
    assert cli.main(["--config", str(write(tmp_path, text)), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out / "visibility.csv")
    assert rows[0][:5] == ["N", "q0A", "V_measured", "V_analytic", "bound"]
    data = np.array(rows[1:], dtype=float)
    N, qa, vm, va, b = data[:, :5].T
    np.testing.assert_allclose(vm, (N - 1) / (qa + N - 1), rtol=1e-9)
    np.testing.assert_allclose(va, vm, rtol=1e-9)
    np.testing.assert_allclose(b, (N - 1) / N)


def test_two_arm_scan_writes_heatmap(tmp_path):
    text = "[run]\norder = 3\nmode = analytic\n[scan]\narms = 2, 3\npoints = 12\n"
    out = tmp_path / "h"
    with pytest.warns(Warning):
        assert cli.main(["--config", str(write(tmp_path, text)), "--out", str(out), "--quiet"]) == 0
    img = read_pgm(out / "heatmap_arm2_arm3.pgm")
    assert img.shape == (12, 12) and img.max() == 255 and img.min() >= 0
    assert len(read_csv(out / "scan_arm2_arm3.csv")) == 145


def test_exit_codes(tmp_path, monkeypatch, capsys):
    bad = write(tmp_path, "[run]\nfoo = 1\n", "bad.ini")
    assert cli.main(["--config", str(bad)]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    virtual = write(tmp_path, "[ref]\nz_r0 = 0.15\n" + SMALL, "virtual.ini")
    assert cli.main(["--config", str(virtual), "--out", str(tmp_path / "x"), "--quiet"]) == cli.EXIT_DOMAIN
    assert "virtual" in capsys.readouterr().err

    import ghostcorr.validation as validation

    monkeypatch.setattr(validation, "run_all", lambda threads=1, report=print: [CheckResult("stub", False, "x")])
    assert cli.main(["--mode", "validate", "--out", str(tmp_path / "v"), "--quiet"]) == cli.EXIT_VALIDATION


def test_analytic_mode_handles_virtual_geometry(tmp_path):
    virtual = write(tmp_path, "[run]\nmode = analytic\n[ref]\nz_r0 = 0.15\n[scan]\npoints = 16\n")
    out = tmp_path / "a"
    assert cli.main(["--config", str(virtual), "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["derived"]["arms"][0]["kind"] == "virtual"


def test_console_entry_point(tmp_path):
    out = tmp_path / "e"
    proc = subprocess.run([sys.executable, "-m", "ghostcorr.cli", "--mode", "classify", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "arm 2: real" in proc.stdout
