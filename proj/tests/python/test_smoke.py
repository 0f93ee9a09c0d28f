import math

import pytest

import adrenaline_sim as ads


def test_kv_bytes_llama7b_2k_is_one_gib():
    assert ads.kv_bytes(2048) == 2 * 2 * 4096 * 32 * 2048 == 1 << 30
    assert ads.kv_bytes(0) == 0


def test_b_max_crossover():
    assert ads.b_max_for_balance(4096, 128) == 132
    assert ads.b_max_for_balance(4096, 1) == 1


def test_launch_stall():
    assert ads.launch_overhead(32, False, 1.137e-3, 0.38e-3) == pytest.approx(32 * 0.757e-3)
    assert ads.launch_overhead(32, True, 1.137e-3, 0.38e-3) == pytest.approx(1.137e-3)


def test_bounds():
    assert ads.ob_mem([40e9, 40e9], [1e12, 1e12], 64e9, 2e12) == pytest.approx(1.0)
    assert ads.ob_comp(128, 80) == pytest.approx(0.6)
    assert ads.combined_bound(0.6, 1.0) == 0.6


def test_need_offload_examples():
    d = ads.need_offload(100, 2048, 0.7, decode_used_tokens=10000, num_local=1)
    assert d["c1"] and d["offload"]
    d = ads.need_offload(500, 3000, 0.7, attn_used_tokens=5000, decode_used_tokens=10000,
                         num_offloaded=3, num_local=10)
    assert not d["c1"] and d["c2"]
    assert not ads.need_offload(1, 2, 0.0, decode_used_tokens=10000, num_local=8)["offload"]


def test_curves():
    assert ads.attn_bw_fraction(0.2) == pytest.approx(0.6)
    assert ads.prefill_slowdown(0.8) == pytest.approx(1.12)
    with pytest.raises(ads.Error):
        ads.prefill_slowdown(0.0)
    c = ads.fit_curves([(0.2, 1200.0), (1.0, 2000.0)], [(0.5, 70.0), (1.0, 50.0)])
    assert c["bw"][0][1] == pytest.approx(0.6)
    assert c["slowdown"][0][1] == pytest.approx(1.4)
    with pytest.raises(ads.CurveError):
        ads.fit_curves([(0.2, 0.6), (0.3, 0.5), (1.0, 1.0)], [(1.0, 1.0)])


def test_graphs():
    cd, co, interval = ads.build_grid(64, 64, 16, 100)
    assert cd == co == [16, 32, 48, 64] and interval == 16
    assert ads.select_graph(20, 5, 64, 64, 16, 100) == (32, 16)


def test_percentile_nearest_rank():
    assert ads.percentile(list(range(1, 101)), 99) == 99
    assert math.isnan(ads.percentile([], 99))


def test_run_small_experiment_is_deterministic():
    cfg = {"offload": {"mode": "fixed", "ratio": 0.7}}
    a = ads.run(cfg, preset="sharegpt-like", rate=4.0, num_requests=80, seed=3)
    b = ads.run(cfg, preset="sharegpt-like", rate=4.0, num_requests=80, seed=3)
    assert a["report_hash"] == b["report_hash"]
    assert a["summary"]["completed"] == 80
    assert a["summary"]["throughput"] > 0
    assert a["partition"]["prefill_sm_ratio"] == pytest.approx(0.7)
    assert all(r["completed"] for r in a["requests"])


def test_run_rejects_bad_config():
    with pytest.raises(ads.ConfigError, match="workload.rate"):
        ads.run(rate=-1.0)
    with pytest.raises(ads.ConfigError, match="bogus"):
        ads.run({"bogus": 1})
