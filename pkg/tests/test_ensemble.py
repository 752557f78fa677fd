import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from branchlat.ensemble import (ExperimentConfig, ResultSet, append_fit,
                                parse_config_text, read_results,
                                run_experiment, seed_stream, write_results)
from branchlat.lattice import ConfigurationError


class TestSeedStream:
    def test_repeatable(self):
        assert seed_stream(42, 7) == seed_stream(42, 7)

    def test_no_collisions_over_a_million_indices(self):
        master = 123456789
        seeds = {seed_stream(master, i) for i in range(1_000_000)}
        assert len(seeds) == 1_000_000

    def test_masters_decorrelate(self):
        idx = 1234
        assert seed_stream(1, idx) != seed_stream(2, idx)

    def test_64_bit_range(self):
        for i in (0, 1, 10, 999):
            s = seed_stream(2**63, i)
            assert 0 <= s < 2**64

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**64 - 1), st.integers(0, 2**32),
           st.integers(0, 2**32))
    def test_distinct_indices_distinct_seeds(self, master, i, j):
        if i != j:
            assert seed_stream(master, i) != seed_stream(master, j)


class TestConfigParsing:
    GOOD = """
# avalanche run
experiment = avalanche
family = v
width = 10
depth = 10
fraction = 0.05
realizations = 8
master_seed = 42
"""

    def test_round_trip_values(self):
        cfg = parse_config_text(self.GOOD)
        assert cfg.kind == "avalanche"
        assert cfg.width == 10 and cfg.fraction == 0.05
        assert cfg.master_seed == 42

    def test_unknown_key_rejected_with_line(self):
        with pytest.raises(ConfigurationError, match="line 3"):
            parse_config_text("experiment = avalanche\nfamily = v\nbogus = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigurationError, match="duplicate"):
            parse_config_text("experiment = avalanche\nwidth = 3\nwidth = 4\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigurationError, match="bad value"):
            parse_config_text("experiment = avalanche\nwidth = ten\n")

    def test_missing_kind(self):
        with pytest.raises(ConfigurationError, match="experiment"):
            parse_config_text("family = v\n")

    def test_jump_scaling_validation_names_field(self):
        with pytest.raises(ConfigurationError, match="sides"):
            ExperimentConfig(kind="jump-scaling", sides=(10, 20),
                             q_list=(0.1,), realizations=2)

    def test_sweep_validation(self):
        with pytest.raises(ConfigurationError, match="mu_max"):
            ExperimentConfig(kind="percolation-sweep", family="v",
                             width=8, depth=8, mu_step=0.5)


def tiny_avalanche_config(**over):
    kw = dict(kind="avalanche", family="v", width=12, depth=12, fraction=0.1,
              realizations=6, master_seed=7)
    kw.update(over)
    return ExperimentConfig(**kw)


def tiny_sweep_config(**over):
    kw = dict(kind="percolation-sweep", family="v", width=10, depth=10,
              mu_max=3.0, mu_step=0.5, realizations=4, master_seed=5)
    kw.update(over)
    return ExperimentConfig(**kw)


def tiny_jump_config(**over):
    kw = dict(kind="jump-scaling", sides=(6, 9, 12), q_list=(0.1, 0.3),
              realizations=3, master_seed=2)
    kw.update(over)
    return ExperimentConfig(**kw)


class TestRunExperiment:
    def test_avalanche_reruns_identically(self):
        a = run_experiment(tiny_avalanche_config())
        b = run_experiment(tiny_avalanche_config())
        assert a == b

    def test_sweep_echoes_grid(self):
        cfg = tiny_sweep_config()
        res = run_experiment(cfg)
        grid_col = [row[0] for row in res.tables["grid"][1]]
        assert grid_col == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]

    def test_jump_scaling_tables(self):
        res = run_experiment(tiny_jump_config())
        assert len(res.tables["scaling"][1]) == 6  # 2 q values x 3 sizes
        assert len(res.tables["fits"][1]) == 2

    @pytest.mark.parametrize("workers", [1, 4, 8])
    def test_worker_count_does_not_change_results(self, workers):
        res = run_experiment(tiny_avalanche_config(), workers=workers)
        ref = run_experiment(tiny_avalanche_config(), workers=1)
        assert res == ref

    def test_sweep_worker_independence(self):
        ref = run_experiment(tiny_sweep_config(), workers=1)
        par = run_experiment(tiny_sweep_config(), workers=4)
        assert ref == par

    def test_jump_worker_independence(self):
        ref = run_experiment(tiny_jump_config(), workers=1)
        par = run_experiment(tiny_jump_config(), workers=4)
        assert ref == par


class TestResultFiles:
    def test_round_trip_identity(self, tmp_path):
        for cfg in (tiny_avalanche_config(), tiny_sweep_config(),
                    tiny_jump_config()):
            res = run_experiment(cfg)
            path = tmp_path / "out.txt"
            write_results(res, str(path))
            back = read_results(str(path))
            assert back == res

    def test_reruns_differ_only_in_metadata(self, tmp_path):
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        write_results(run_experiment(tiny_avalanche_config()), str(p1))
        write_results(run_experiment(tiny_avalanche_config()), str(p2))
        l1 = p1.read_text().splitlines()
        l2 = p2.read_text().splitlines()
        assert len(l1) == len(l2)
        for a, b in zip(l1, l2):
            if a != b:
                assert a.split("=")[0].strip() in ("created", "elapsed_s")

    def test_truncated_file_is_an_error(self, tmp_path):
        res = run_experiment(tiny_avalanche_config())
        path = tmp_path / "out.txt"
        write_results(res, str(path))
        text = path.read_text()
        # cut a table row short
        lines = text.splitlines()
        lines[-1] = lines[-1].rsplit(",", 2)[0]
        broken = tmp_path / "broken.txt"
        broken.write_text("\n".join(lines) + "\n")
        with pytest.raises(ConfigurationError, match="line"):
            read_results(str(broken))

    def test_not_a_result_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello\nworld\n")
        with pytest.raises(ConfigurationError, match="line 1"):
            read_results(str(path))

    def test_appended_fit_round_trips(self, tmp_path):
        res = run_experiment(tiny_avalanche_config())
        path = tmp_path / "out.txt"
        write_results(res, str(path))
        append_fit(str(path), "powerlaw",
                   {"alpha": 1.18, "chi2": 0.0009, "points": 4})
        back = read_results(str(path))
        assert back.fits["powerlaw"] == {"alpha": 1.18, "chi2": 0.0009,
                                         "points": 4}
        rewritten = tmp_path / "again.txt"
        write_results(back, str(rewritten))
        assert read_results(str(rewritten)) == back

    def test_parse_error_carries_line_number(self, tmp_path):
        res = run_experiment(tiny_avalanche_config())
        path = tmp_path / "out.txt"
        write_results(res, str(path))
        lines = path.read_text().splitlines()
        lines.insert(4, "free floating nonsense")
        bad = tmp_path / "bad.txt"
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(ConfigurationError, match="line 5"):
            read_results(str(bad))
