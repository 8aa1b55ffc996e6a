"""The ``nlsinstab`` command line: exit codes, outputs, caching and config handling."""

import math
import subprocess
import sys

import numpy as np
import pytest

from fixtures import LAMBDA_P7
from nlsinstab.artifacts import file_digest, read_csv, read_json
from nlsinstab.cli import EXIT_ACCEPT, EXIT_ARGS, EXIT_OK, EXIT_SOLVER, dispatch


@pytest.fixture(scope="module")
def p7_files(tmp_path_factory):
    """A p = 7 wave and its dense spectrum on a 256-point box."""
    d = tmp_path_factory.mktemp("p7")
    wave, spec = d / "wave.json", d / "spec.json"
    assert dispatch(["solve", "--p", "7", "--L", "25", "--n", "256", "--out", str(wave)]) == EXIT_OK
    assert dispatch(["spectrum", "--wave", str(wave), "--out", str(spec)]) == EXIT_OK
    return wave, spec


@pytest.fixture(scope="module")
def p3_wave(tmp_path_factory):
    path = tmp_path_factory.mktemp("p3") / "wave.json"
    assert dispatch(["solve", "--p", "3", "--L", "40", "--n", "256", "--out", str(path)]) == EXIT_OK
    return path


class TestExitCodes:
    def test_verify_mapping(self, capsys):
        assert dispatch(["verify", "--suite", "mapping"]) == EXIT_OK
        assert "verify mapping: PASS" in capsys.readouterr().out

    def test_missing_flag_named(self, capsys):
        assert dispatch(["solve", "--dim", "1"]) == EXIT_ARGS
        err = capsys.readouterr().err
        assert "--p" in err and "--out" in err

    def test_supercritical(self, tmp_path, capsys):
        assert dispatch(["solve", "--p", "6", "--dim", "3", "--out", str(tmp_path / "w.json")]) == EXIT_SOLVER
        assert "2*-1" in capsys.readouterr().err
        assert not (tmp_path / "w.json").exists()

    def test_unknown_subcommand(self, capsys):
        assert dispatch(["frobnicate"]) == EXIT_ARGS

    def test_missing_input_file(self, tmp_path):
        code = dispatch(["spectrum", "--wave", str(tmp_path / "nope.json"), "--out", str(tmp_path / "s.json")])
        assert code == EXIT_ARGS

    def test_wave_without_embedding(self, tmp_path):
        wave = tmp_path / "w.json"
        assert dispatch(["solve", "--p", "3", "--out", str(wave)]) == EXIT_OK
        assert dispatch(["spectrum", "--wave", str(wave), "--out", str(tmp_path / "s.json")]) == EXIT_ARGS

    def test_half_grid_rejected(self, tmp_path):
        assert dispatch(["solve", "--p", "3", "--L", "40", "--out", str(tmp_path / "w.json")]) == EXIT_ARGS

    def test_no_escape_is_acceptance_failure(self, p7_files, tmp_path):
        wave, spec = p7_files
        out = tmp_path / "run.json"
        code = dispatch(["instability", "--wave", str(wave), "--spectrum", str(spec), "--delta", "1e-4",
                         "--eps0", "1e-2", "--t-max", "0.5", "--out", str(out)])
        assert code == EXIT_ACCEPT
        assert read_json(out)["escaped"] is False

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "nlsinstab", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and "nlsinstab" in proc.stdout


class TestSolve:
    def test_outputs_and_manifest(self, p3_wave):
        w = read_json(p3_wave)
        assert w["profile"][0] == pytest.approx(math.sqrt(2), abs=1e-6)
        man = read_json(str(p3_wave) + ".manifest.json")
        assert man["command"] == "solve"
        assert man["parameters"]["p"] == 3.0
        assert man["fixtures"]["amplitude"] == pytest.approx(math.sqrt(2), abs=1e-6)
        assert man["outputs"] == [str(p3_wave)]

    def test_cache_hit_gives_identical_output(self, tmp_path):
        args = ["solve", "--p", "5", "--L", "30", "--n", "128", "--cache-dir", str(tmp_path / "cache")]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert dispatch(args + ["--out", str(a)]) == EXIT_OK
        assert dispatch(args + ["--out", str(b)]) == EXIT_OK
        assert file_digest(a) == file_digest(b)
        assert read_json(str(a) + ".manifest.json")["cache"]["hit"] is False
        assert read_json(str(b) + ".manifest.json")["cache"]["hit"] is True

    def test_config_flags_take_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("p = 3\nomega = 4.0\n")
        out = tmp_path / "w.json"
        assert dispatch(["solve", "--config", str(cfg), "--omega", "1.0", "--out", str(out)]) == EXIT_OK
        w = read_json(out)
        assert w["omega"] == 1.0 and w["profile"][0] == pytest.approx(math.sqrt(2), abs=1e-6)
        assert str(cfg) in read_json(str(out) + ".manifest.json")["inputs"]

    def test_interface_aliases(self, tmp_path):
        out = tmp_path / "v.json"
        assert dispatch(["solve", "--p", "5", "--dim", "2", "--vortex", "1", "--rmax", "30", "--out", str(out)]) == EXIT_OK
        w = read_json(out)
        assert w["kind"] == "vortex" and w["charge"] == 1 and w["r"][-1] == pytest.approx(30.0)

    def test_config_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("p = 3\nbogus = 1\n")
        assert dispatch(["solve", "--config", str(cfg), "--out", str(tmp_path / "w.json")]) == EXIT_ARGS
        assert "bogus" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        outs = [tmp_path / f"{i}.json" for i in range(2)]
        for o in outs:
            assert dispatch(["solve", "--p", "7", "--L", "25", "--n", "128", "--out", str(o)]) == EXIT_OK
        assert file_digest(outs[0]) == file_digest(outs[1])


class TestPipeline:
    def test_spectrum(self, p7_files):
        rep = read_json(p7_files[1])
        assert rep["lambda_star"][0] == pytest.approx(LAMBDA_P7, rel=0.01)

    def test_evolve_columns(self, p3_wave, tmp_path):
        out = tmp_path / "trace.csv"
        assert dispatch(["evolve", "--wave", str(p3_wave), "--T", "1", "--dt", "1e-3", "--sample", "0.25",
                         "--out", str(out)]) == EXIT_OK
        tr = read_csv(out)
        assert list(tr) == ["t", "mass", "energy", "L2(v)", "Linf(v)", "orbital_distance"]
        np.testing.assert_allclose(tr["t"], [0, 0.25, 0.5, 0.75, 1.0])
        assert np.max(tr["orbital_distance"]) < 1e-5
        assert read_json(str(out) + ".manifest.json")["steps"] == 1000

    def test_evolve_perturbed_by_chi(self, p7_files, tmp_path):
        wave, spec = p7_files
        out = tmp_path / "trace.csv"
        assert dispatch(["evolve", "--wave", str(wave), "--perturb", str(spec), "--delta", "1e-4",
                         "--T", "0.5", "--dt", "5e-5", "--sample", "0.1", "--out", str(out)]) == EXIT_OK
        d = read_csv(out)["orbital_distance"]
        assert 0 < d[0] <= 1e-4
        assert d[-1] > d[0]

    def test_instability(self, p7_files, tmp_path):
        wave, spec = p7_files
        out = tmp_path / "run.json"
        assert dispatch(["instability", "--wave", str(wave), "--spectrum", str(spec), "--delta", "1e-4",
                         "--eps0", "1e-2", "--out", str(out)]) == EXIT_OK
        run = read_json(out)
        assert run["escaped"] and run["fitted_rate"] == pytest.approx(LAMBDA_P7, rel=0.1)
        man = read_json(str(out) + ".manifest.json")
        assert set(man["inputs"]) == {str(wave), str(spec)}
        assert man["steps"] > 0

    def test_sweep(self, p7_files, tmp_path):
        wave, spec = p7_files
        out = tmp_path / "sweep.csv"
        assert dispatch(["sweep", "--wave", str(wave), "--spectrum", str(spec), "--deltas", "1e-3,1e-4,1e-5",
                         "--eps0", "0.1", "--out", str(out)]) == EXIT_OK
        sw = read_csv(out)
        assert list(sw) == ["delta", "escape_time", "fitted_rate", "witness_at_escape"]
        assert np.all(np.diff(sw["escape_time"]) < 0)  # rows ordered by increasing delta
        man = read_json(str(out) + ".manifest.json")
        assert man["fixtures"]["slope"] == pytest.approx(1 / LAMBDA_P7, rel=0.1)
        assert man["fixtures"]["flags"] == []

    def test_outputs_deterministic(self, p7_files, tmp_path):
        wave, spec = p7_files
        outs = [tmp_path / f"{i}.json" for i in range(2)]
        for o in outs:
            assert dispatch(["spectrum", "--wave", str(wave), "--out", str(o)]) == EXIT_OK
        assert file_digest(outs[0]) == file_digest(outs[1])
