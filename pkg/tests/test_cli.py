import csv

import numpy as np
import pytest

from fprsim.cli import GAIN_COLUMNS, MU_COLUMNS, SWEEP_COLUMNS, main
from fprsim.config import ScenarioConfig, default_N_list, load_config, parse_config_text
from fprsim.errors import InvalidArgument
from fprsim.geometry import assign_reuse_coloring, build_hex_grid
from fprsim.optimizer import Evaluator
from fprsim.propagation import PropagationModel
from fprsim.providers import MonteCarloMuProvider
from fprsim.semodel import Combiner, SystemParams

SMALL = "K_max = 12\nn_samples = 3000\nN_list = 10, 100, 1000\n"


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def test_defaults_match_scenario():
    c = ScenarioConfig()
    assert (c.tiers, c.kappa, c.T, c.snr_db, c.min_dist_fraction, c.n_samples) == (3, 3.5, 1000, 10.0, 0.14, 10**6)
    assert c.inv_snr == pytest.approx(0.1)
    assert c.beta_set == (1, 3) and c.seed == 0
    assert c.combiners == (Combiner.MRC, Combiner.PZFC)
    assert c.edge_mrc_load_factor == "printed" and c.noncoherent == "all"
    N = default_N_list()
    assert len(N) == 13 and N[0] == 10 and N[-1] == 10_000
    assert {10, 100, 1000, 10_000} <= set(N)


def test_config_parsing(tmp_path):
    c = parse_config_text("# comment\nkappa = 3.7\nbeta_set = 1 3 7\ncombiners = MRC\nn_samples = 1e5  # inline\n")
    assert c.kappa == 3.7 and c.beta_set == (1, 3, 7) and c.combiners == (Combiner.MRC,) and c.n_samples == 100_000
    with pytest.raises(InvalidArgument):
        parse_config_text("colour = red\n")
    with pytest.raises(InvalidArgument):
        parse_config_text("T = many\n")
    with pytest.raises(InvalidArgument):
        parse_config_text("beta_set = 2\n")
    with pytest.raises(InvalidArgument):
        parse_config_text("noncoherent = sometimes\n")
    p = tmp_path / "c.cfg"
    p.write_text("seed = 9\n")
    assert load_config(p).seed == 9
    assert load_config(p).replace(seed=3, n_samples=None).seed == 3


def test_evaluate_matches_library(tmp_path, cfg_file):
    out = tmp_path / "o"
    args = ["--config", cfg_file, "--out-dir", str(out), "evaluate", "--N", "100", "--K", "10",
            "--beta", "3", "--beta-f", "0.2", "--combiner", "P-ZFC"]
    assert main(args) == 0
    rows = read(out / "evaluate.csv")
    assert rows[0] == SWEEP_COLUMNS
    provider = MonteCarloMuProvider(build_hex_grid(1.0, 3), PropagationModel(3.5), 3000, drop_size=12)
    res = Evaluator(provider, 0.1).evaluate(SystemParams(N=100, K=10, beta=3, beta_f=0.2, inv_snr=0.1), "P-ZFC")
    assert rows[1][2] == "FPR"
    assert float(rows[1][7]) == res.se
    assert rows[1][7] == "%.17g" % res.se


def test_evaluate_labels_and_edge_cases(tmp_path, cfg_file, capsys):
    out = str(tmp_path / "o")
    base = ["--config", cfg_file, "--out-dir", out, "evaluate", "--N", "100", "--K", "10", "--beta", "3"]
    assert main(base + ["--combiner", "MRC"]) == 0
    assert read(tmp_path / "o" / "evaluate.csv")[1][2] == "baseline-equivalent"
    assert "baseline-equivalent" in capsys.readouterr().out
    assert main(base + ["--combiner", "P-ZFC", "--N", "20"]) == 3
    assert "InsufficientAntennas" in capsys.readouterr().err
    assert main(["--config", cfg_file, "--out-dir", out, "evaluate", "--N", "100", "--K", "400",
                 "--beta", "3", "--combiner", "MRC"]) == 3
    assert "InfeasibleParameters" in capsys.readouterr().err


def test_evaluate_full_block_gives_zero(tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("T = 30\nK_max = 10\nn_samples = 500\n")
    assert main(["--config", str(cfg), "--out-dir", str(tmp_path), "evaluate", "--N", "100", "--K", "10",
                 "--beta", "3", "--combiner", "MRC"]) == 0
    assert float(read(tmp_path / "evaluate.csv")[1][7]) == 0.0


def test_estimate_mu_is_reproducible(tmp_path):
    outs = []
    for i, extra in enumerate(([], ["--no-cache"], ["--threads", "2", "--no-cache"])):
        d = tmp_path / str(i)
        assert main(["--n-samples", "9000", "--seed", "3", "--out-dir", str(d)] + extra +
                    ["estimate-mu", "--K", "10", "--beta-f", "0.2"]) == 0
        outs.append((d / "mu_K10_m2.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    rows = read(tmp_path / "0" / "mu_K10_m2.csv")
    assert rows[0] == MU_COLUMNS
    own = [r for r in rows[1:] if r[0] == "0"]
    assert all(r[5] == "1" and r[6] == "0" for r in own)
    assert len(rows) == 1 + 37 * 4


def test_oracle_check(tmp_path, capsys):
    assert main(["--n-samples", "20000", "--out-dir", str(tmp_path), "oracle-check", "--resolution", "24"]) == 0
    assert "within 3 standard errors" in capsys.readouterr().out


def test_sweep_and_table(tmp_path, cfg_file):
    out = tmp_path / "o"
    assert main(["--config", cfg_file, "--out-dir", str(out), "sweep", "--all-points"]) == 0
    for name in ("mrc_fpr", "mrc_baseline", "pzfc_fpr", "pzfc_baseline"):
        rows = read(out / f"sweep_{name}.csv")
        assert rows[0] == SWEEP_COLUMNS and len(rows) == 4
        assert len(read(out / f"points_{name}.csv")) > 4
    assert main(["--config", cfg_file, "--out-dir", str(out), "reproduce-table1", "--combiner", "MRC"]) == 0
    rows = read(out / "table1_gains.csv")
    assert rows[0] == GAIN_COLUMNS
    assert [r[0] for r in rows[1:]] == ["10", "100", "1000", "10000"]
    assert all(float(r[4]) >= 0 for r in rows[1:])


def test_betaf_profile(tmp_path, cfg_file, capsys):
    assert main(["--config", cfg_file, "--out-dir", str(tmp_path), "betaf-profile", "--N", "1000", "--beta", "3",
                 "--combiner", "MRC", "--K", "12"]) == 0
    rows = read(tmp_path / "betaf_profile_N1000_beta3_mrc.csv")
    assert len(rows) == 13 and rows[1][4] == "0"
    assert main(["--config", cfg_file, "--out-dir", str(tmp_path), "betaf-profile", "--N", "1000", "--beta", "1",
                 "--combiner", "P-ZFC"]) == 0
    assert "best beta_f" in capsys.readouterr().out


def test_bad_arguments(tmp_path):
    with pytest.raises(SystemExit):
        main(["evaluate", "--N", "10"])
    assert main(["--config", str(tmp_path / "missing.cfg"), "sweep"]) == 4
