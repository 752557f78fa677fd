import os

import numpy as np
import pytest

from branchlat.cli import main
from branchlat.ensemble import read_results
from branchlat.lattice import LatticeSpec, build_lattice, compute_capacities, serialize_lattice


def run_cli(*args):
    return main(list(args))


class TestGenerate:
    def test_v_lattice_to_stdout(self, capsys):
        assert run_cli("generate", "--family", "v", "--size", "8", "--seed", "0") == 0
        out = capsys.readouterr().out
        expected = serialize_lattice(build_lattice(LatticeSpec(width=8, depth=8,
                                                               family="v")))
        assert out == expected

    def test_annotate_appends_diagram(self, capsys):
        assert run_cli("generate", "--family", "v", "--size", "4",
                       "--seed", "0", "--annotate") == 0
        out = capsys.readouterr().out
        assert "\\" in out and "|" in out
        assert "10" in out  # deepest trunk capacity appears in the diagram

    def test_output_file(self, tmp_path, capsys):
        path = tmp_path / "lat.txt"
        assert run_cli("generate", "--family", "base", "--size", "5",
                       "--p", "0.5", "--seed", "3", "-o", str(path)) == 0
        assert path.read_text().startswith("# branchlat lattice M=5 N=5")

    def test_missing_size_is_config_error(self, capsys):
        assert run_cli("generate", "--family", "v", "--seed", "1") == 2

    def test_seedless_warns(self, capsys):
        assert run_cli("generate", "--family", "v", "--size", "3") == 0
        assert "no --seed" in capsys.readouterr().err


class TestExperiments:
    def test_avalanche_writes_result(self, tmp_path, capsys):
        out = tmp_path / "av.txt"
        code = run_cli("avalanche", "--family", "v", "--size", "10",
                       "--fraction", "0.1", "-R", "5", "--seed", "9",
                       "-o", str(out))
        assert code == 0
        res = read_results(str(out))
        assert res.config.kind == "avalanche"
        assert len(res.tables["samples"][1]) == 5

    def test_percolate_trajectory_csv(self, tmp_path, capsys):
        out = tmp_path / "traj.csv"
        code = run_cli("percolate", "--family", "v", "--size", "6",
                       "--seed", "4", "-o", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "n,mu,s,s1"
        first = lines[1].split(",")
        assert float(first[2]) == pytest.approx(21 / 36)

    def test_sweep_and_fit_roundtrip(self, tmp_path, capsys):
        out = tmp_path / "sweep.txt"
        code = run_cli("sweep", "--family", "v", "--size", "8",
                       "--mu-max", "2", "--mu-step", "0.5", "-R", "3",
                       "--seed", "2", "-o", str(out))
        assert code == 0
        res = read_results(str(out))
        assert "grid" in res.tables and "jumps" in res.tables

    def test_jumpscale_rejects_two_sizes(self, capsys):
        code = run_cli("jumpscale", "--sizes", "10", "20", "--q-values", "0.1",
                       "-R", "2", "--seed", "1")
        assert code == 2

    def test_jumpscale_small_run(self, tmp_path, capsys):
        out = tmp_path / "js.txt"
        code = run_cli("jumpscale", "--sizes", "6", "8", "10",
                       "--q-values", "0.2", "-R", "2", "--seed", "1",
                       "-o", str(out))
        assert code == 0
        assert "phi=" in capsys.readouterr().out

    def test_fit_powerlaw_from_result_file(self, tmp_path, capsys):
        out = tmp_path / "av.txt"
        run_cli("avalanche", "--family", "v", "--size", "30",
                "--fraction", "0.05", "-R", "200", "--seed", "9", "-o", str(out))
        code = run_cli("fit", "--input", str(out), "--kind", "powerlaw")
        assert code == 0
        text = capsys.readouterr().out
        assert "window scan" in text

    def test_fit_gaussian(self, tmp_path, capsys):
        out = tmp_path / "av.txt"
        run_cli("avalanche", "--family", "base", "--size", "20", "--p", "0.5",
                "--fraction", "0.1", "-R", "100", "--seed", "3", "-o", str(out))
        code = run_cli("fit", "--input", str(out), "--kind", "gaussian")
        assert code == 0
        assert "skewness" in capsys.readouterr().out

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("experiment = avalanche\nfamily = v\nwidth = 10\n"
                       "depth = 10\nfraction = 0.1\nrealizations = 4\n"
                       "master_seed = 1\n")
        out = tmp_path / "res.txt"
        code = run_cli("avalanche", "--config", str(cfg), "--size", "12",
                       "--seed", "1", "-o", str(out), "--fraction", "0.1")
        assert code == 0
        res = read_results(str(out))
        assert res.config.width == 12  # flag wins over file

    def test_config_file_values_survive_absent_flags(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("experiment = avalanche\nfamily = base\np = 0.5\n"
                       "width = 9\ndepth = 7\nfraction = 0.2\n"
                       "realizations = 3\nmaster_seed = 6\n")
        out = tmp_path / "res.txt"
        code = run_cli("avalanche", "--config", str(cfg), "--seed", "6",
                       "-o", str(out))
        assert code == 0
        res = read_results(str(out))
        assert res.config.family == "base"
        assert (res.config.width, res.config.depth) == (9, 7)
        assert res.config.realizations == 3

    def test_unknown_figure_id(self, capsys):
        assert run_cli("reproduce", "figX", "--seed", "1") == 2


class TestReproduceConfigMapping:
    def test_fig2a_maps_to_published_parameters(self, tmp_path, capsys):
        # full scale: the V ensembles are cheap because the lattice is cached
        code = run_cli("reproduce", "fig2a", "--seed", "7",
                       "--outdir", str(tmp_path))
        assert code == 0
        res = read_results(str(tmp_path / "fig2a_result.txt"))
        cfg = res.config
        assert (cfg.kind, cfg.family, cfg.width, cfg.depth) == \
            ("avalanche", "v", 100, 100)
        assert cfg.fraction == 0.05
        assert cfg.realizations == 1000
        assert "powerlaw" in res.fits  # the matching fit is appended


class TestReproduceScaled:
    def test_fig2a_scaled(self, tmp_path, capsys):
        code = run_cli("reproduce", "fig2a", "--seed", "7", "--scale", "0.2",
                       "--outdir", str(tmp_path))
        assert code == 0
        out = capsys.readouterr().out
        assert "fig2a" in out  # either a fitted alpha line or a warn line
        assert (tmp_path / "fig2a_result.txt").exists()
        assert (tmp_path / "fig2a_pt.dat").exists()
        data = (tmp_path / "fig2a_pt.dat").read_text().splitlines()
        assert data[0].startswith("#")
        assert len(data) > 3

    def test_fig5_scaled(self, tmp_path, capsys):
        code = run_cli("reproduce", "fig5", "--seed", "3", "--scale", "0.15",
                       "--outdir", str(tmp_path))
        assert code == 0
        assert (tmp_path / "fig5_S.dat").exists()
        assert (tmp_path / "fig5_S1.dat").exists()
        res = read_results(str(tmp_path / "fig5_result.txt"))
        assert res.config.kind == "percolation-sweep"

    def test_fig7_scaled(self, tmp_path, capsys):
        code = run_cli("reproduce", "fig7", "--seed", "5", "--scale", "0.12",
                       "--outdir", str(tmp_path))
        assert code == 0
        out = capsys.readouterr().out
        assert "phi" in out or "q=" in out
        assert (tmp_path / "fig7_phi.dat").exists()

    def test_scale_validation(self, capsys):
        assert run_cli("reproduce", "fig2a", "--seed", "1", "--scale", "1.5") == 2
