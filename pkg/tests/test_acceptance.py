"""Acceptance criteria. Each test records one PASS/FAIL line, printed in the
terminal summary. Criteria that the method cannot reach are still checked at
their full tolerance and marked xfail(strict=True) with the reason."""

import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from mocpd import detector as det_mod
from mocpd import vae
from mocpd.benchmark import run_benchmark, run_leak_property
from mocpd.cli import main
from mocpd.core import DetectorConfig, Memory, Window
from mocpd.detector import MOCPDDetector, as_points, detect_values, run_stream
from mocpd.dissimilarity import mmd_squared
from mocpd.evaluate import f_beta
from mocpd.memory import compute_threshold, offer_reservoir
from mocpd.simulate import LEAK_RATES, expected_leak_shift, gen_fuel_leak

SEEDS = range(5)


def record(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def mmd_runs():
    out = {}
    for kind in ("jm", "gm"):
        t0 = time.perf_counter()
        res = run_benchmark(kind, "mmd", SEEDS)
        out[kind] = (res, time.perf_counter() - t0)
    return out


@pytest.mark.slow
def test_jm_benchmark(mmd_runs):
    res, secs = mmd_runs["jm"]
    record(
        "JM benchmark, MMD F1 >= 0.50 in < 120 s",
        res.mean_f1 >= 0.50 and secs < 120,
        f"mean F1 {res.mean_f1:.4f} over seeds {list(SEEDS)}, {secs:.1f} s",
    )


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="window-vs-centroid MMD cannot separate the two mixtures at w=25; best tuned F1 ~0.21",
)
def test_gm_benchmark(mmd_runs):
    res, secs = mmd_runs["gm"]
    record("GM benchmark, MMD F1 >= 0.45", res.mean_f1 >= 0.45, f"mean F1 {res.mean_f1:.4f}, {secs:.1f} s")


@pytest.mark.slow
def test_measure_ordering(mmd_runs):
    mean_jm = run_benchmark("jm", "mean", SEEDS).mean_f1
    vae_jm = run_benchmark("jm", "vae", SEEDS).mean_f1
    vae_gm = run_benchmark("gm", "vae", SEEDS).mean_f1
    mmd_jm, mmd_gm = mmd_runs["jm"][0].mean_f1, mmd_runs["gm"][0].mean_f1
    record(
        "Mean on JM >= 0.35 and MMD >= VAE on JM and GM",
        mean_jm >= 0.35 and mmd_jm >= vae_jm and mmd_gm >= vae_gm,
        f"JM mean {mean_jm:.4f} / mmd {mmd_jm:.4f} / vae {vae_jm:.4f}; "
        f"GM mmd {mmd_gm:.4f} / vae {vae_gm:.4f}",
    )


def leak_sigma(w: int = 100, seeds=range(20)) -> float:
    """Base noise std making the mean 0.2 gph shift one std of a w-sample mean."""
    shifts = []
    for seed in seeds:
        _, sc = gen_fuel_leak(avg_rate=0.2, seed=seed)
        s, e = sc.start_idx, sc.stop_idx
        shifts.append(expected_leak_shift(0.2, sc.h_series[s:e], sc.h_max[s:e]))
    return float(np.mean(shifts)) * math.sqrt(w)


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason="a one-std shift of the 100-sample mean sits far below the alpha=4 threshold",
)
def test_fuel_leak_property():
    sigma = leak_sigma()
    rates = {rate: run_leak_property(rate, sigma) for rate in sorted(LEAK_RATES, reverse=True)}
    top = rates[0.2]
    ordered = [rates[r].both_detected for r in (0.2, 0.1, 0.05)]
    ok = (
        top.both_detected >= 0.70
        and top.mean_false_positives <= 2
        and ordered[0] >= ordered[1] >= ordered[2]
    )
    record(
        "FL property: onset+repair >= 70%, <= 2 FP/seq, monotone in leak rate",
        ok,
        f"sigma {sigma:.4f}; both-detected 0.2/0.1/0.05 gph = "
        + "/".join(f"{v:.2f}" for v in ordered)
        + f"; FP/seq at 0.2 = {top.mean_false_positives:.2f}",
    )


REFERENCE_ROWS = [
    (0.6398, 0.3899, 0.5671), (0.6820, 0.4014, 0.5983), (0.7031, 0.3913, 0.6064), (0.6922, 0.3815, 0.5952),
    (0.6667, 0.3992, 0.5879), (0.7104, 0.4024, 0.6161), (0.7052, 0.3958, 0.6098), (0.6760, 0.3788, 0.5843),
    (0.5344, 0.3858, 0.4961), (0.5177, 0.4115, 0.4922), (0.5677, 0.4301, 0.5335), (0.5240, 0.4419, 0.5051),
]


def test_metric_oracle():
    errs = [abs(f_beta(p, r, 2.0) - f2) for r, p, f2 in REFERENCE_ROWS]
    record("F2 reproduces 12 reference rows within 0.001", max(errs) <= 0.001, f"max error {max(errs):.2e}")


def loop_mmd(w, m, sigma):
    def kmean(x, y):
        return sum(math.exp(-((a - b) ** 2) / (2 * sigma * sigma)) for a in x for b in y) / (len(x) * len(y))

    return kmean(w, w) - 2 * kmean(w, m) + kmean(m, m)


def test_mmd_brute_force():
    rng = np.random.default_rng(2024)
    worst_diff, lowest = 0.0, math.inf
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        w = rng.normal(size=n) * rng.uniform(0.1, 3)
        m = rng.normal(size=n) * rng.uniform(0.1, 3) + rng.normal()
        sigma = float(np.exp(rng.uniform(-3, 3)))
        raw = mmd_squared(w, m, sigma)
        worst_diff = max(worst_diff, abs(raw - loop_mmd(w.tolist(), m.tolist(), sigma)))
        lowest = min(lowest, raw)
    record(
        "MMD matches double-loop oracle on 1000 triples; pre-clamp >= -1e-12",
        worst_diff <= 1e-12 and lowest >= -1e-12,
        f"max |diff| {worst_diff:.2e}, min raw {lowest:.2e}",
    )


def test_reservoir_correctness():
    stream_len, m, trials = 1000, 10, 20_000
    rng = np.random.default_rng(99)
    stream = [Window(i, np.zeros(1)) for i in range(stream_len)]
    counts = np.zeros(stream_len)
    for _ in range(trials):
        memory = Memory()
        for lo in range(0, stream_len, 15):
            offer_reservoir(memory, stream[lo : lo + 15], m, rng)
        for w in memory.samples:
            counts[w.start] += 1
    freq = counts / trials
    dev = float(np.max(np.abs(freq - m / stream_len)))
    pval = float(stats.chisquare(counts).pvalue)
    record(
        "Reservoir retention within 0.003 of 0.01, chi-square p > 0.01",
        dev <= 0.003 and pval > 0.01,
        f"max |freq - 0.01| {dev:.4f}, p {pval:.3f}",
    )


def test_vae_gradient_check():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 6))
    noise = rng.standard_normal((3, 2))
    model = vae.init_model(6, 2, seed=1)
    for p in model.params.values():
        p += rng.normal(scale=0.1, size=p.shape)
    _, grads = vae.vae_loss_and_grads(model.params, x, noise)
    worst = 0.0
    eps = 1e-5
    for name, value in model.params.items():
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            up = vae.vae_loss(model.params, x, noise)
            value[idx] = orig - eps
            down = vae.vae_loss(model.params, x, noise)
            value[idx] = orig
            num = (up - down) / (2 * eps)
            ana = grads[name][idx]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-8))
    record("VAE analytic vs finite-difference gradients < 1e-4", worst < 1e-4, f"max relative error {worst:.2e}")


def test_delayed_threshold(monkeypatch):
    checks = []
    real = det_mod.run_update_phase

    def spy(memory, buffer, cfg, measure, rng):
        expected = compute_threshold(memory.samples, memory.centroid, measure, cfg.alpha, cfg.p)
        new = real(memory, buffer, cfg, measure, rng)
        checks.append(new.threshold == expected)
        return new

    monkeypatch.setattr(det_mod, "run_update_phase", spy)
    rng = np.random.default_rng(8)
    x = np.concatenate([rng.normal(size=3000), rng.normal(2.0, 1.0, size=3000)])
    detect_values(DetectorConfig(), x)
    record(
        "Update phase installs the threshold of the pre-update memory (exact)",
        bool(checks) and all(checks),
        f"{sum(checks)}/{len(checks)} update phases exact",
    )


def mean_step_us(cfg, n, seed=0):
    x = np.random.default_rng(seed).normal(size=n)
    res = run_stream(cfg, as_points(x), detector=MOCPDDetector(cfg), time_steps=True)
    return float(np.mean(res.step_ns)) / 1e3, res


def test_latency():
    mmd_cfg = DetectorConfig(measure="mmd")
    mean_cfg = DetectorConfig(measure="mean")
    _, mmd_res = mean_step_us(mmd_cfg, 10_000)
    _, mean_res = mean_step_us(mean_cfg, 10_000)
    mmd_ms = float(np.mean(mmd_res.decision_ns)) / 1e6
    mean_ms = float(np.mean(mean_res.decision_ns)) / 1e6
    short, _ = mean_step_us(mmd_cfg, 5_000, seed=1)
    long, _ = mean_step_us(mmd_cfg, 50_000, seed=1)
    ratio = long / short
    record(
        "Decision time MMD <= 10 ms, Mean <= 2 ms; step cost growth <= 2x at 10x length",
        mmd_ms <= 10 and mean_ms <= 2 and ratio <= 2,
        f"MMD {mmd_ms:.3f} ms, Mean {mean_ms:.3f} ms, step {short:.0f} us -> {long:.0f} us ({ratio:.2f}x)",
    )


def test_determinism(tmp_path):
    rng = np.random.default_rng(5)
    x = np.concatenate([rng.normal(size=1500), rng.normal(3.0, 1.0, size=1500)])
    src = tmp_path / "series.csv"
    src.write_text("index,value\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(x.tolist())))
    identical = []
    for measure in ("mean", "mmd", "vae"):
        outs = [tmp_path / f"{measure}{k}" for k in range(2)]
        for out in outs:
            assert main(["detect", str(src), "--out", str(out), "--measure", measure, "--seed", "7",
                         "--window", "50", "--min-memory", "20", "--buffer", "10"]) == 0
        identical.append(all(
            (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
            for f in ("detections.csv", "trace.csv")
        ))
    record(
        "Byte-identical detections.csv and trace.csv across reruns (mean, mmd, vae)",
        all(identical),
        f"identical: {dict(zip(('mean', 'mmd', 'vae'), identical))}",
    )
