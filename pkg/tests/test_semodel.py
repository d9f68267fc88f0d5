import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import random_mu
from fprsim.errors import DegenerateUnbounded, InfeasibleParameters, InsufficientAntennas, InvalidArgument
from fprsim.geometry import assign_reuse_coloring, build_hex_grid
from fprsim.mustats import GroupStatistics, estimate_moment_table
from fprsim.providers import QuadratureMuProvider
from fprsim.semodel import (
    Combiner,
    ModelOptions,
    SystemParams,
    asymptotic_se,
    baseline_spectral_efficiency,
    se_over_splits,
    se_stderr,
    sinr_mrc_edge,
    sinr_mrc_interior,
    sinr_pzfc_edge,
    sinr_pzfc_interior,
    spectral_efficiency,
)

N_GRID = [10, 18, 32, 56, 100, 178, 316, 562, 1000, 1778, 3162, 5623, 10000]


@pytest.fixture(scope="module")
def quad(grid, model):
    return QuadratureMuProvider(grid, model, grid_resolution=16)


@pytest.fixture(scope="module")
def grids(grid):
    return {b: assign_reuse_coloring(grid, b) for b in (1, 3, 4, 7)}


def stats_from(K, m, rng, n=37):
    kw = {}
    kw["mu_E_1"], kw["mu_E_2"] = random_mu(rng, n)
    if m:
        kw["mu_I_1"], kw["mu_I_2"] = random_mu(rng, n, spread=0.1)
    return GroupStatistics(K=K, beta_f=m / K, **kw)


def test_pilot_book_size():
    # K = 5, beta = 3 with two interior users needs B = 11 pilots
    assert SystemParams(N=100, K=5, beta=3, beta_f=0.4).B == 11
    assert SystemParams(N=100, K=10, beta=3, beta_f=0.0).B == 30
    assert SystemParams(N=100, K=10, beta=1, beta_f=0.7).B == 10


def test_params_validation():
    with pytest.raises(InfeasibleParameters):
        SystemParams(N=100, K=400, T=1000, beta=3)
    with pytest.raises(InvalidArgument):
        SystemParams(N=100, K=10, inv_snr=0.0)
    with pytest.raises(InvalidArgument):
        SystemParams(N=0, K=10)
    with pytest.raises(InvalidArgument):
        SystemParams(N=10, K=10, beta_f=0.25)
    assert SystemParams.from_snr_db(10, 1, snr_db=10).inv_snr == pytest.approx(0.1)


def test_single_cell_closed_form():
    g = assign_reuse_coloring(build_hex_grid(1.0, 0), 1)
    one = np.ones(1)
    s = GroupStatistics(K=10, beta_f=0.0, mu_E_1=one, mu_E_2=one)
    p = SystemParams(N=100, K=10, T=1000, beta=1, beta_f=0.0, inv_snr=0.1)
    expected = 1000 / 102.01
    assert sinr_mrc_edge(p, s, [0]) == pytest.approx(expected, rel=1e-14)
    res = spectral_efficiency(p, s, g, "MRC")
    assert res.sinr_edge == pytest.approx(9.8030, abs=5e-5)
    assert res.se == pytest.approx(10 * 0.99 * math.log2(1 + expected), rel=1e-14)
    assert res.se == pytest.approx(33.99, abs=5e-3)
    assert res.se_asymptotic == math.inf
    with pytest.raises(DegenerateUnbounded):
        asymptotic_se(p, s, g)
    si = GroupStatistics(K=10, beta_f=0.2, mu_E_1=one, mu_E_2=one, mu_I_1=one, mu_I_2=one)
    pi = SystemParams(N=100, K=10, T=1000, beta=1, beta_f=0.2, inv_snr=0.1)
    assert sinr_mrc_interior(pi, si, [0]) == pytest.approx(expected, rel=1e-14)


def test_transcription_oracle_random_tables(grids):
    rng = np.random.default_rng(20240601)
    cells = list(range(37))
    for trial in range(100):
        beta = (1, 3, 4, 7)[trial % 4]
        K = int(rng.integers(2, 40))
        m = int(rng.integers(1, K))
        N = int(rng.integers(beta * K + 1, 5000))
        inv = float(rng.uniform(0.01, 10))
        s = stats_from(K, m, rng)
        p = SystemParams(N=N, K=K, T=10_000, beta=beta, beta_f=m / K, inv_snr=inv)
        Lj = [int(x) for x in grids[beta].pilot_sharing_set(0)]
        B = p.B
        for mode in ("all", "printed"):
            opt = ModelOptions(noncoherent=mode)
            got = sinr_mrc_edge(p, s, Lj, options=opt, all_cells=cells)
            ref = oracles.mrc_edge(N, K, B, inv, s.mu_E_1, s.mu_E_2, cells, Lj, noncoherent=mode)
            assert got == pytest.approx(ref, rel=1e-12)
            got = sinr_pzfc_edge(p, s, Lj, options=opt, all_cells=cells)
            ref = oracles.pzfc_edge(N, K - m, B, inv, s.mu_E_1, s.mu_E_2, cells, Lj, noncoherent=mode)
            assert got == pytest.approx(ref, rel=1e-12)
        got = sinr_mrc_interior(p, s, cells)
        assert got == pytest.approx(oracles.mrc_interior(N, K, B, inv, s.mu_I_1, s.mu_I_2, cells), rel=1e-12)
        got = sinr_pzfc_interior(p, s, cells)
        assert got == pytest.approx(oracles.pzfc_interior(N, m, B, inv, s.mu_I_1, s.mu_I_2, cells), rel=1e-12)


def test_symmetric_load_factor_option(grids):
    rng = np.random.default_rng(1)
    s = stats_from(20, 5, rng)
    p = SystemParams(N=500, K=20, beta=3, beta_f=0.25)
    Lj = grids[3].pilot_sharing_set(0)
    sym = ModelOptions(edge_mrc_load_factor="symmetric")
    got = sinr_mrc_edge(p, s, Lj, options=sym, all_cells=range(37))
    ref = oracles.mrc_edge(500, 15, p.B, 0.1, s.mu_E_1, s.mu_E_2, range(37), Lj)
    assert got == pytest.approx(ref, rel=1e-12)
    assert got > sinr_mrc_edge(p, s, Lj, all_cells=range(37))


def test_noncoherent_modes_coincide_for_beta1(grids, quad):
    s = quad.statistics(10, 0.3)
    p = SystemParams(N=300, K=10, beta=1, beta_f=0.3)
    for c in Combiner:
        a = spectral_efficiency(p, s, grids[1], c, ModelOptions("all"))
        b = spectral_efficiency(p, s, grids[1], c, ModelOptions("printed"))
        assert a.se == b.se


def test_options_validation():
    with pytest.raises(InvalidArgument):
        ModelOptions(noncoherent="some")
    with pytest.raises(InvalidArgument):
        ModelOptions(edge_mrc_load_factor="x")
    assert Combiner.parse("pzfc") is Combiner.PZFC
    assert Combiner.parse("mrc") is Combiner.MRC
    with pytest.raises(InvalidArgument):
        Combiner.parse("MMSE")


def test_pzfc_needs_more_antennas(grids, quad):
    p = SystemParams(N=30, K=10, beta=3, beta_f=0.0)
    with pytest.raises(InsufficientAntennas):
        spectral_efficiency(p, quad.statistics(10, 0.0), grids[3], "P-ZFC")
    assert spectral_efficiency(p, quad.statistics(10, 0.0), grids[3], "MRC").se > 0


def test_mismatched_statistics(grids, quad):
    p = SystemParams(N=300, K=10, beta=3, beta_f=0.2)
    with pytest.raises(InvalidArgument):
        spectral_efficiency(p, quad.statistics(10, 0.3), grids[3], "MRC")
    with pytest.raises(InvalidArgument):
        spectral_efficiency(p, quad.statistics(5, 0.2), grids[3], "MRC")
    with pytest.raises(InvalidArgument):
        spectral_efficiency(p, quad.statistics(10, 0.2), grids[1], "MRC")


def test_zero_prelog_and_zero_users(grids, quad):
    p = SystemParams(N=300, K=10, T=30, beta=3, beta_f=0.0)
    res = spectral_efficiency(p, quad.statistics(10, 0.0), grids[3], "MRC")
    assert res.se == 0.0 and res.se_asymptotic == 0.0
    empty = SystemParams(N=300, K=0, beta=3)
    assert spectral_efficiency(empty, None, grids[3], "P-ZFC").se == 0.0
    assert baseline_spectral_efficiency(empty, None, grids[3], "MRC").se == 0.0


@settings(max_examples=60, deadline=None)
@given(
    K=st.integers(1, 40),
    beta=st.sampled_from([1, 3, 4, 7]),
    N=st.integers(10, 20000),
    snr_db=st.floats(-5, 25),
    combiner=st.sampled_from(list(Combiner)),
    mode=st.sampled_from(["all", "printed"]),
)
def test_beta_f_zero_collapse(grids, quad, K, beta, N, snr_db, combiner, mode):
    p = SystemParams.from_snr_db(N, K, T=1000, beta=beta, beta_f=0.0, snr_db=snr_db)
    if combiner is Combiner.PZFC and N <= p.B:
        return
    s = quad.statistics(K, 0.0)
    opt = ModelOptions(noncoherent=mode)
    a = spectral_efficiency(p, s, grids[beta], combiner, opt)
    b = baseline_spectral_efficiency(p, s, grids[beta], combiner, opt)
    assert a.se == b.se
    assert a.sinr_interior is None
    ref = K * (1 - beta * K / 1000) * math.log2(1 + a.sinr_edge)
    assert a.se == pytest.approx(ref, rel=1e-12)


def test_baseline_requires_zero_beta_f(grids, quad):
    p = SystemParams(N=300, K=10, beta=3, beta_f=0.2)
    with pytest.raises(InvalidArgument):
        baseline_spectral_efficiency(p, quad.statistics(10, 0.2), grids[3], "MRC")


@pytest.mark.parametrize("combiner", list(Combiner))
@pytest.mark.parametrize("beta,m", [(1, 0), (1, 4), (3, 2), (3, 0), (7, 3)])
def test_se_increases_with_N(grids, quad, combiner, beta, m):
    K = 10
    s = quad.statistics(K, m / K)
    vals = []
    for N in N_GRID:
        p = SystemParams(N=N, K=K, beta=beta, beta_f=m / K)
        if combiner is Combiner.PZFC and N <= p.B:
            continue
        vals.append(spectral_efficiency(p, s, grids[beta], combiner).se)
    assert len(vals) >= 8
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("group", ["I", "E"])
@pytest.mark.parametrize("combiner", list(Combiner))
def test_sinr_decreases_in_cross_cell_mu2(grids, quad, group, combiner):
    s = quad.statistics(10, 0.4)
    p = SystemParams(N=400, K=10, beta=3, beta_f=0.4)
    g = grids[3]
    cells = range(1, 37) if group == "I" else [l for l in g.pilot_sharing_set(0) if l]
    base = spectral_efficiency(p, s, g, combiner)
    ref = base.sinr_interior if group == "I" else base.sinr_edge
    for l in cells:
        mu2 = s.moments(group, 2).copy()
        mu2[l] *= 1.1
        bumped = GroupStatistics(**{**s.__dict__, f"mu_{group}_2": mu2})
        r = spectral_efficiency(p, bumped, g, combiner)
        assert (r.sinr_interior if group == "I" else r.sinr_edge) < ref


@pytest.mark.parametrize("combiner", list(Combiner))
def test_large_antenna_limit(grids, quad, combiner):
    s = quad.statistics(10, 0.2)
    p = SystemParams(N=10**8, K=10, beta=3, beta_f=0.2)
    res = spectral_efficiency(p, s, grids[3], combiner)
    assert abs(res.se - res.se_asymptotic) / res.se_asymptotic < 1e-3
    p0 = SystemParams(N=10**8, K=10, beta=3, beta_f=0.0)
    lim = asymptotic_se(p0, quad.statistics(10, 0.0), grids[3])
    mu2 = quad.statistics(10, 0.0).mu_E_2
    L = [l for l in grids[3].pilot_sharing_set(0) if l]
    assert lim == pytest.approx(10 * 0.97 * math.log2(1 + 1 / mu2[L].sum()), rel=1e-13)


def test_vectorized_splits_match_scalar(grids, quad):
    table = quad.table(12)
    for beta in (1, 3):
        for c in Combiner:
            for mode in ("all", "printed"):
                opt = ModelOptions(noncoherent=mode)
                B, se = se_over_splits(table, 200, 12, beta, 1000, 0.1, grids[beta], c, opt)
                for m in range(12):
                    p = SystemParams(N=200, K=12, beta=beta, beta_f=m / 12)
                    assert B[m] == p.B
                    if c is Combiner.PZFC and 200 <= p.B:
                        assert se[m] == -np.inf
                        continue
                    assert se[m] == spectral_efficiency(p, table.statistics(m / 12), grids[beta], c, opt).se


def test_split_infeasibility_marked(grids, quad):
    B, se = se_over_splits(quad.table(12), 14, 12, 3, 1000, 0.1, grids[3], "P-ZFC")
    assert np.all(se == -np.inf)


def test_se_stderr(grids, grid, model, quad):
    p = SystemParams(N=300, K=6, beta=3, beta_f=0.5)
    assert se_stderr(p, quad.statistics(6, 0.5), grids[3], "MRC") == 0.0
    small = estimate_moment_table(grid, model, 6, 2000, seed=1).statistics(0.5)
    large = estimate_moment_table(grid, model, 6, 32000, seed=1).statistics(0.5)
    e_small = se_stderr(p, small, grids[3], "MRC")
    e_large = se_stderr(p, large, grids[3], "MRC")
    assert e_small > e_large > 0
    assert e_small / e_large == pytest.approx(4.0, rel=0.3)
