"""Scheme simulators: closed forms, invariants, and slope windows."""

import json
import math
import warnings

import numpy as np
import pytest

from hybridscale.channel import ChannelRealization
from hybridscale.protocols import (
    EmptyRoutingCellError,
    SimConfig,
    best_of_schemes,
    cell_sum_rate,
    estimate_hc_single_level,
    fit_scaling_exponent,
    hc_long_range_rate,
    routing_grid_size,
    simulate_imh,
    simulate_ish,
    simulate_mh,
    _sic_rates,
)
from hybridscale.scaling import ScalingPoint, map_finite_n
from hybridscale.topology import Topology, TopologyConfig, generate_topology


def _topo(nodes, antennas=None, m=1, l=1, pairing=None):
    """Hand-placed instance; pairing defaults to identity."""
    nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
    n = len(nodes)
    cfg = TopologyConfig(n=n, m=m, l=l, seed=0)
    ant = (
        np.zeros((m, l, 2))
        if antennas is None
        else np.asarray(antennas, dtype=float).reshape(m, l, 2)
    )
    sd = np.arange(n) if pairing is None else np.asarray(pairing, dtype=np.int64)
    return Topology(
        config=cfg,
        node_positions=nodes,
        bs_centers=cfg.cell_side * (np.indices((int(math.isqrt(m)),) * 2).reshape(2, -1).T + 0.5),
        antenna_positions=ant,
        sd_pairing=sd,
        rcp_position=np.array([cfg.side / 2] * 2),
        footprint_side=0.0,
    )


def _instance(n, beta, gamma, eta, alpha, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fm = map_finite_n(n, ScalingPoint(alpha=alpha, beta=beta, gamma=gamma, eta=eta))
    topo = generate_topology(TopologyConfig(n=n, m=fm.m, l=fm.l, seed=seed))
    ch = ChannelRealization(topo, alpha=alpha, phase_seed=seed)
    return topo, ch, fm


SIZES = (256, 512, 1024, 2048, 4096)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [
        dict(p=-2.0),
        dict(p=math.nan),
        dict(p=math.inf),
        dict(p=1.0, tdma_k=0),
        dict(p=1.0, tdma_k=5),       # not a perfect square
        dict(p=1.0, r_bs=-1.0),
        dict(p=1.0, r_bs=math.nan),
        dict(p=1.0, hc_cluster_exponent=0.0),
        dict(p=1.0, hc_cluster_exponent=1.0),
        dict(p=1.0, hc_quant_bits=0),
    ],
)
def test_sim_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_zero_power_means_zero_rates():
    topo, ch, _ = _instance(256, 0.5, 0.25, math.inf, 3.0, 0)
    cfg = SimConfig(p=0.0)
    assert simulate_mh(topo, ch, cfg).aggregate_throughput == 0.0
    assert simulate_imh(topo, ch, cfg).aggregate_throughput == 0.0
    assert simulate_ish(topo, ch, cfg).aggregate_throughput == 0.0
    assert estimate_hc_single_level(topo, ch, cfg).aggregate_throughput == 0.0


def test_sim_result_serializes():
    topo, ch, _ = _instance(256, 0.5, 0.25, math.inf, 5.0, 0)
    res = simulate_imh(topo, ch, SimConfig(p=1e3))
    blob = json.loads(json.dumps(res.to_dict()))
    assert blob["scheme"] == "IMH"
    assert len(blob["per_pair_rates"]) == 256
    assert set(blob["stage_rates"]) == {"access", "backhaul", "exit"}
    assert res.aggregate_throughput == pytest.approx(
        float(res.per_pair_rates.sum()), rel=1e-12
    )


# ---------------------------------------------------------------------------
# MH
# ---------------------------------------------------------------------------

def test_mh_two_nodes_closed_form():
    topo = generate_topology(TopologyConfig(n=2, seed=7))
    ch = ChannelRealization(topo, alpha=3.0, phase_seed=7)
    res = simulate_mh(topo, ch, SimConfig(p=5.0))
    d = float(np.linalg.norm(topo.node_positions[0] - topo.node_positions[1]))
    assert res.aggregate_throughput == pytest.approx(
        math.log2(1.0 + 5.0 * d**-3.0) / 9.0, rel=1e-12
    )
    # both directions share the single cell equally
    assert res.per_pair_rates[0] == res.per_pair_rates[1]


def test_mh_load_doubling_halves_per_pair():
    topo, ch, _ = _instance(256, 0.0, 0.0, math.inf, 3.0, 2)
    cfg = SimConfig(p=100.0)
    base = simulate_mh(topo, ch, cfg)
    pairs = np.column_stack([np.arange(256), topo.sd_pairing])
    doubled = simulate_mh(topo, ch, cfg, pairs=np.vstack([pairs, pairs]))
    assert np.array_equal(doubled.per_pair_rates[:256], base.per_pair_rates / 2.0)
    assert np.array_equal(doubled.per_pair_rates[256:], doubled.per_pair_rates[:256])
    assert doubled.aggregate_throughput == pytest.approx(
        base.aggregate_throughput, rel=1e-9
    )


def test_mh_empty_routing_cell_raises():
    # 64 nodes crammed into one corner leave the other routing cells bare
    rng = np.random.default_rng(0)
    nodes = rng.uniform(0.0, 1.0, size=(64, 2))
    topo = _topo(nodes, pairing=np.roll(np.arange(64), 1))
    assert routing_grid_size(64) == 2
    ch = ChannelRealization(topo, alpha=3.0)
    with pytest.raises(EmptyRoutingCellError):
        simulate_mh(topo, ch, SimConfig(p=1.0))


def test_mh_deterministic_and_phase_free():
    topo, ch, _ = _instance(256, 0.0, 0.0, math.inf, 3.0, 5)
    cfg = SimConfig(p=100.0)
    a = simulate_mh(topo, ch, cfg)
    b = simulate_mh(topo, ch, cfg)
    assert np.array_equal(a.per_pair_rates, b.per_pair_rates)
    # MH uses only path losses, so fading phases are irrelevant
    other = ChannelRealization(topo, alpha=3.0, phase_seed=999)
    c = simulate_mh(topo, other, cfg)
    assert np.array_equal(a.per_pair_rates, c.per_pair_rates)
    topo2, ch2, _ = _instance(256, 0.0, 0.0, math.inf, 3.0, 6)
    d = simulate_mh(topo2, ch2, cfg)
    assert not np.array_equal(a.per_pair_rates, d.per_pair_rates)


def test_mh_slope_in_window():
    pts = []
    for n in SIZES:
        agg = [
            simulate_mh(*_instance(n, 0.0, 0.0, math.inf, 3.0, s)[:2],
                        SimConfig(p=1e8, tdma_k=289)).aggregate_throughput
            for s in range(4)
        ]
        pts.append((n, float(np.mean(agg))))
    slope, _ = fit_scaling_exponent(pts)
    assert 0.35 <= slope <= 0.65


# ---------------------------------------------------------------------------
# IMH
# ---------------------------------------------------------------------------

def test_imh_single_bs_closed_form():
    """Two nodes, one antenna, one routing cell: shares computable by hand."""
    topo = _topo(
        [[0.6, 0.7], [1.2, 0.7]],
        antennas=[[0.7, 0.7]],
        pairing=[1, 0],
    )
    ch = ChannelRealization(topo, alpha=4.0)
    res = simulate_imh(topo, ch, SimConfig(p=2.0))
    rate = lambda d: math.log2(1.0 + 2.0 * d**-4.0)
    # access load 2 and exit load 2 in the lone cell, parallelism 1
    expected0 = min(rate(0.1), rate(0.5)) / 18.0
    expected1 = min(rate(0.5), rate(0.1)) / 18.0
    assert res.per_pair_rates[0] == pytest.approx(expected0, rel=1e-12)
    assert res.per_pair_rates[1] == pytest.approx(expected1, rel=1e-12)
    assert res.stage_rates.backhaul == pytest.approx(
        res.stage_rates.access, rel=1e-12
    )


def test_imh_zero_backhaul_zeroes_everything():
    topo, ch, _ = _instance(256, 0.5, 0.25, -math.inf, 5.0, 1)
    res = simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=0.0))
    assert res.aggregate_throughput == 0.0
    assert res.stage_rates.backhaul == 0.0
    assert np.all(res.per_pair_rates == 0.0)


def test_imh_infinite_backhaul_is_uncapped_bit_exact():
    topo, ch, _ = _instance(512, 0.5, 0.25, math.inf, 5.0, 3)
    res_inf = simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=math.inf))
    res_big = simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=1e9))
    assert np.array_equal(res_inf.per_pair_rates, res_big.per_pair_rates)
    assert res_inf.stage_rates.backhaul == res_inf.stage_rates.access


def test_imh_monotone_in_backhaul_rate():
    topo, ch, _ = _instance(256, 0.5, 0.25, math.inf, 5.0, 4)
    prev_agg, prev_stage = -1.0, -1.0
    for r_bs in (0.0, 0.01, 0.1, 1.0, 10.0, math.inf):
        res = simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=r_bs))
        assert res.aggregate_throughput >= prev_agg
        assert res.stage_rates.backhaul >= prev_stage
        prev_agg, prev_stage = res.aggregate_throughput, res.stage_rates.backhaul
        if math.isfinite(r_bs):
            assert res.aggregate_throughput <= topo.m * r_bs + 1e-9


def test_imh_backhaul_clips_exactly():
    topo, ch, fm = _instance(256, 0.5, 0.25, 0.0, 5.0, 0)
    res = simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=fm.r_bs))
    # every BS is demand-saturated, so the stage pins to m * R_BS exactly
    assert res.stage_rates.backhaul == topo.m * fm.r_bs
    assert res.aggregate_throughput <= topo.m * fm.r_bs + 1e-9
    assert res.stage_rates.access > res.stage_rates.backhaul


def test_imh_slope_in_window():
    pts = []
    for n in SIZES:
        agg = []
        for s in range(4):
            topo, ch, fm = _instance(n, 0.5, 0.25, math.inf, 5.0, s)
            agg.append(
                simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=fm.r_bs)).aggregate_throughput
            )
        pts.append((n, float(np.mean(agg))))
    slope, _ = fit_scaling_exponent(pts)
    assert 0.6 <= slope <= 0.9


def test_imh_aggregate_below_stage_totals():
    topo, ch, _ = _instance(512, 0.5, 0.25, math.inf, 5.0, 8)
    res = simulate_imh(topo, ch, SimConfig(p=1e3, r_bs=2.0))
    assert res.aggregate_throughput <= res.stage_rates.access + 1e-9
    assert res.aggregate_throughput <= res.stage_rates.exit + 1e-9
    assert res.aggregate_throughput <= res.stage_rates.backhaul + 1e-9


def test_per_cell_parallelism_respects_bs_power_budget():
    # min(l, ceil(sqrt(n/m))) antennas at power P never exceed the nP/m budget
    for n, m, l in [(256, 16, 4), (90, 49, 1), (1024, 25, 40), (4096, 64, 64)]:
        cfg = TopologyConfig(n=n, m=m, l=l, seed=0)
        par = cfg.boundary_count
        assert par * 1.0 <= n / m


# ---------------------------------------------------------------------------
# ISH
# ---------------------------------------------------------------------------

def test_ish_single_user_rate_matches_scalar_formula():
    # node 0 sits at distance 0.5 from its antenna; others are ~1e6 away
    far = [[1e6 + i, 1e6] for i in range(4)]
    topo = _topo(
        [[1.0, 1.0]] + far,
        antennas=[[[1.0, 1.5]], [[2e6, 0.0]], [[0.0, 2e6]], [[2e6, 2e6]]],
        m=4,
        l=1,
    )
    ch = ChannelRealization(topo, alpha=3.0)
    h_own = ch.uplink_matrix(0, np.array([0]))
    h_out = ch.uplink_matrix(0, np.array([1, 2, 3, 4]))
    noise = np.eye(1) + 4.0 * (h_out @ h_out.conj().T)
    rates = _sic_rates(h_own, np.linalg.inv(noise), 4.0)
    assert rates[0] == pytest.approx(math.log2(1.0 + 4.0 * 0.5**-3.0), rel=1e-9)


def test_ish_sic_chain_matches_logdet():
    """Sum of successive-decoding rates equals the log-det sum capacity."""
    topo, ch, _ = _instance(256, 0.5, 0.25, math.inf, 3.0, 11)
    home = topo.cell_index_of(topo.node_positions)
    b = int(np.argmax(np.bincount(home)))
    own = np.nonzero(home == b)[0]
    out = np.nonzero(home != b)[0]
    h_own = ch.uplink_matrix(b, own)
    h_out = ch.uplink_matrix(b, out)
    p = 7.0
    noise = np.eye(topo.l) + p * (h_out @ h_out.conj().T)
    rates = _sic_rates(h_own, np.linalg.inv(noise), p)
    assert float(rates.sum()) == pytest.approx(
        cell_sum_rate(h_own, noise, p), abs=1e-9
    )
    # two-user, two-antenna special case against the plain identity-noise form
    topo2 = _topo(
        [[0.4, 0.4], [1.0, 0.6]],
        antennas=[[[0.5, 0.9], [0.9, 0.9]]],
        m=1,
        l=2,
        pairing=[1, 0],
    )
    ch2 = ChannelRealization(topo2, alpha=2.0)
    h = ch2.uplink_matrix(0, np.array([0, 1]))
    rates2 = _sic_rates(h, np.eye(2, dtype=complex), 3.0)
    direct = math.log2(
        float(np.real(np.linalg.det(np.eye(2) + 3.0 * (h @ h.conj().T))))
    )
    assert float(rates2.sum()) == pytest.approx(direct, abs=1e-9)


def test_ish_monotone_in_backhaul_and_power():
    topo, ch, _ = _instance(256, 0.5, 0.5, math.inf, 2.4, 2)
    prev = -1.0
    for r_bs in (0.0, 0.1, 1.0, math.inf):
        res = simulate_ish(topo, ch, SimConfig(p=10.0, r_bs=r_bs))
        assert res.aggregate_throughput >= prev
        prev = res.aggregate_throughput
        if math.isfinite(r_bs):
            assert res.aggregate_throughput <= topo.m * r_bs + 1e-9
    res_inf = simulate_ish(topo, ch, SimConfig(p=10.0, r_bs=math.inf))
    res_big = simulate_ish(topo, ch, SimConfig(p=10.0, r_bs=1e9))
    assert np.array_equal(res_inf.per_pair_rates, res_big.per_pair_rates)
    weaker = simulate_ish(topo, ch, SimConfig(p=1.0, r_bs=math.inf))
    assert weaker.aggregate_throughput < res_inf.aggregate_throughput


def test_ish_slope_in_window():
    pts = []
    for n in SIZES:
        agg = []
        for s in range(3):
            topo, ch, fm = _instance(n, 0.5, 0.5, math.inf, 2.4, s)
            agg.append(
                simulate_ish(topo, ch, SimConfig(p=10.0, r_bs=fm.r_bs)).aggregate_throughput
            )
        pts.append((n, float(np.mean(agg))))
    slope, _ = fit_scaling_exponent(pts)
    assert 0.75 <= slope <= 1.05


# ---------------------------------------------------------------------------
# HC estimate
# ---------------------------------------------------------------------------

def test_hc_single_cluster_degenerates_to_direct_rate():
    topo = _topo([[0.4, 0.4], [1.0, 0.4]], pairing=[1, 0])
    ch = ChannelRealization(topo, alpha=3.0)
    res = estimate_hc_single_level(
        topo, ch, SimConfig(p=5.0, hc_cluster_exponent=0.1)
    )
    assert res.detail == "single_level_estimate"
    assert res.aggregate_throughput == pytest.approx(
        math.log2(1.0 + 5.0 * 0.6**-3.0), rel=1e-12
    )


def test_hc_long_range_rate_matches_dense_logdet():
    topo, ch, _ = _instance(256, 0.0, 0.0, math.inf, 2.5, 3)
    a_nodes = np.array([0, 1, 2])
    b_nodes = np.array([10, 11])
    got = hc_long_range_rate(ch, a_nodes, b_nodes, 6.0)
    h = ch.node_gain_matrix(a_nodes, b_nodes)
    mat = np.eye(2) + 2.0 * (h @ h.conj().T)
    want = math.log2(float(np.real(np.linalg.det(mat))))
    assert got == pytest.approx(want, abs=1e-9)


def test_hc_beats_mh_near_alpha_two():
    wins = 0
    for s in range(8):
        topo = generate_topology(TopologyConfig(n=1024, seed=s))
        ch = ChannelRealization(topo, alpha=2.2, phase_seed=s)
        cfg = SimConfig(p=1e4, hc_cluster_exponent=0.5)
        hc = estimate_hc_single_level(topo, ch, cfg).aggregate_throughput
        mh = simulate_mh(topo, ch, cfg).aggregate_throughput
        wins += hc > mh
    assert wins >= 7


# ---------------------------------------------------------------------------
# best_of_schemes / fit_scaling_exponent
# ---------------------------------------------------------------------------

def test_best_of_zero_backhaul_goes_ad_hoc():
    topo, ch, _ = _instance(256, 0.5, 0.25, -math.inf, 3.0, 0)
    name, res = best_of_schemes(topo, ch, SimConfig(p=100.0, r_bs=0.0))
    assert name in {"MH", "HC"}
    assert res.aggregate_throughput > 0.0


def test_best_of_no_infrastructure_goes_ad_hoc():
    # a lone single-antenna BS caps ISH/IMH at one spatial degree of freedom
    for s in range(2):
        topo, ch, _ = _instance(256, 0.0, 0.0, math.inf, 3.0, s)
        name, _ = best_of_schemes(topo, ch, SimConfig(p=1e4))
        assert name in {"MH", "HC"}


def test_best_of_regime_b_point_picks_imh():
    # dense infrastructure with unlimited backhaul: IMH should dominate in
    # the large majority of draws (we ask for 8 of 10)
    wins = 0
    for s in range(10):
        topo, ch, fm = _instance(4096, 0.5, 0.25, math.inf, 5.0, s)
        name, _ = best_of_schemes(topo, ch, SimConfig(p=1e6, r_bs=fm.r_bs))
        wins += name == "IMH"
    assert wins >= 8


def test_fit_exact_power_laws():
    ns = [100, 200, 400, 800]
    slope, stderr = fit_scaling_exponent([(n, n**0.5) for n in ns])
    assert slope == pytest.approx(0.5, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)
    slope, _ = fit_scaling_exponent([(n, 3.7 * n**0.82) for n in ns])
    assert slope == pytest.approx(0.82, abs=1e-12)


def test_fit_needs_three_distinct_sizes():
    with pytest.raises(ValueError):
        fit_scaling_exponent([(100, 1.0), (100, 2.0), (200, 3.0)])


def test_fit_coverage_on_synthetic_noise():
    """~95% of noisy fits should land within two standard errors of truth."""
    rng = np.random.default_rng(2024)
    ns = np.logspace(2, 4, 500)
    hits = 0
    for _ in range(1000):
        y = ns**0.7 * np.exp(rng.normal(0.0, 0.1, size=ns.size))
        slope, stderr = fit_scaling_exponent(list(zip(ns, y)))
        hits += abs(slope - 0.7) <= 2.0 * stderr
    assert hits >= 950
