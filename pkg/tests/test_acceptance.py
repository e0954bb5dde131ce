"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Fast criteria always run.  The desk-scale runs (Binder crossings, data
collapse, secondary transitions, CDHM crossing) take tens of minutes to
hours and are marked `slow`; enable them with MDITE_RUN_SLOW=1 (or
`pytest -m slow`).  Tolerances are fixed here, from the criteria text.
"""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner
from scipy.stats import mannwhitneyu

from mdite import oracle
from mdite.cli import main
from mdite.estimators import binned_estimate, binder_ratio, make_bins
from mdite.models import (
    CDHM,
    TFIM,
    ModelSpec,
    ProtocolParams,
    auto_depth,
    build_chain_lattice,
    build_columnar_rect,
)
from mdite.sse import SseSampler, run_chain
from mdite.sse.state import merge_split_probabilities

RUN_SLOW = os.environ.get("MDITE_RUN_SLOW", "") == "1"
slow = pytest.mark.skipif(not RUN_SLOW, reason="desk-scale run; set MDITE_RUN_SLOW=1")

THREADS = str(min(2, os.cpu_count() or 1))


def report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def within(est_mean, est_err, exact, n_sigma=3.0):
    return abs(est_mean - exact) <= n_sigma * est_err


# ---------------------------------------------------------------------------
# Criterion 1: oracle equivalence, TFIM N=4
# ---------------------------------------------------------------------------

def test_oracle_equivalence_tfim():
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(4), h=1.8)
    proto = ProtocolParams(tau=1.0, p=0.66, n_layers=4)
    series = run_chain(model, proto, sweeps=400_000, equilibration=10_000, seed=101,
                       track_flag_marginals=True)
    ref = oracle.exact_observables(oracle.evolve(model, proto), model)
    marg = oracle.flag_marginals(model, proto)
    checks = []
    for name, channel, exact in [
        ("m2", series.m2, ref.m2_density),
        ("m4", series.m4, ref.m4_density),
    ]:
        est = binned_estimate(channel)
        checks.append((name, est.mean, est.error, exact))
    r2 = binder_ratio(make_bins(series.channels()))
    checks.append(("R2", r2.mean, r2.error, ref.binder))
    hist = series.flag_history.reshape(len(series), -1).astype(np.float64)
    for k in range(hist.shape[1]):
        est = binned_estimate(hist[:, k])
        checks.append((f"flag{k}", est.mean, est.error, marg.ravel()[k]))
    ok = all(within(m, e, x) and e <= 0.005 for _, m, e, x in checks)
    worst = max(checks, key=lambda c: abs(c[1] - c[3]) / max(c[2], 1e-12))
    report(
        "oracle-equivalence-TFIM", ok,
        f"worst {worst[0]}: {worst[1]:.5f}+-{worst[2]:.5f} vs {worst[3]:.5f}; "
        f"max err {max(c[2] for c in checks):.5f}",
    )


# ---------------------------------------------------------------------------
# Criterion 2: oracle equivalence, CDHM N=8 (4x2 columnar tile)
# ---------------------------------------------------------------------------

def test_oracle_equivalence_cdhm():
    model = ModelSpec(kind=CDHM, lattice=build_columnar_rect(4, 2), g=3.5)
    proto = ProtocolParams(tau=1.0, p=0.5, n_layers=3)
    series = run_chain(model, proto, sweeps=400_000, equilibration=10_000, seed=102,
                       track_flag_marginals=True)
    ref = oracle.exact_observables(oracle.evolve(model, proto), model)
    marg = oracle.flag_marginals(model, proto)
    checks = []
    for name, channel, exact in [
        ("m2", series.m2, ref.m2_density),
        ("m4", series.m4, ref.m4_density),
    ]:
        est = binned_estimate(channel)
        checks.append((name, est.mean, est.error, exact))
    r2 = binder_ratio(make_bins(series.channels()))
    checks.append(("R2", r2.mean, r2.error, ref.binder))
    hist = series.flag_history.reshape(len(series), -1).astype(np.float64)
    for k in range(hist.shape[1]):
        est = binned_estimate(hist[:, k])
        checks.append((f"flag{k}", est.mean, est.error, marg.ravel()[k]))
    ok = all(within(m, e, x) and e <= 0.005 for _, m, e, x in checks)
    worst = max(checks, key=lambda c: abs(c[1] - c[3]) / max(c[2], 1e-12))
    report(
        "oracle-equivalence-CDHM", ok,
        f"worst {worst[0]}: {worst[1]:.5f}+-{worst[2]:.5f} vs {worst[3]:.5f}; "
        f"max err {max(c[2] for c in checks):.5f}",
    )


# ---------------------------------------------------------------------------
# Criterion 3: thermal reduction at p = 0
# ---------------------------------------------------------------------------

def test_thermal_reduction():
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(8), h=1.8)
    proto = ProtocolParams(tau=1.0, p=0.0, n_layers=6)
    series = run_chain(model, proto, sweeps=150_000, equilibration=8_000, seed=103)
    ref = oracle.thermal_observables(model, beta=6.0)
    checks = []
    for name, channel, exact in [
        ("m_abs", series.m_abs, ref.m_abs_density),
        ("m2", series.m2, ref.m2_density),
        ("m4", series.m4, ref.m4_density),
    ]:
        est = binned_estimate(channel)
        checks.append((name, est.mean, est.error, exact))
    r2 = binder_ratio(make_bins(series.channels()))
    checks.append(("R2", r2.mean, r2.error, ref.binder))
    ok = all(within(m, e, x) for _, m, e, x in checks)
    worst = max(checks, key=lambda c: abs(c[1] - c[3]) / max(c[2], 1e-12))
    report("thermal-reduction", ok,
           f"worst {worst[0]}: {worst[1]:.5f}+-{worst[2]:.5f} vs {worst[3]:.5f}")


# ---------------------------------------------------------------------------
# Criterion 4: maximally mixed limit at tiny tau
# ---------------------------------------------------------------------------

def test_maximally_mixed_limit():
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(6), h=1.8)
    proto = ProtocolParams(tau=1e-6, p=0.37, n_layers=3)
    series = run_chain(model, proto, sweeps=60_000, equilibration=1_000, seed=104)
    est = binder_ratio(make_bins(series.channels()))
    exact = 3 - 2 / 6
    ok = within(est.mean, est.error, exact)
    report("maximally-mixed-limit", ok,
           f"R2 {est.mean:.5f}+-{est.error:.5f} vs {exact:.5f}")


# ---------------------------------------------------------------------------
# Criteria 5 & 6: desk-scale critical point and collapse (slow)
# ---------------------------------------------------------------------------

SCAN_P_CFG = """
[model]
kind = "tfim"
L = 16
h = 1.8

[protocol]
tau = 1.0
p = 0.66
n_d = "auto"

[sampler]
sweeps = 100000
equilibration = 10000
chains = 2
seed = 2024

[scan]
axis = "p"
values = [0.60, 0.62, 0.64, 0.66, 0.68, 0.70, 0.72, 0.74]
sizes = [16, 24, 32, 48]

[crossing]
csv = "{out}/scan.csv"

[collapse]
csv = "{out}/scan.csv"
x_c0 = 0.66
nu0 = 1.0
beta_over_nu0 = 0.45
L_min = 16
n_boot = 100

[output]
directory = "{out}"
"""


@pytest.fixture(scope="module")
def tfim_p_scan(tmp_path_factory):
    out = tmp_path_factory.mktemp("tfim-p-scan")
    cfg = out / "scan.toml"
    cfg.write_text(SCAN_P_CFG.format(out=out))
    runner = CliRunner()
    res = runner.invoke(main, ["scan", "--config", str(cfg), "--threads", THREADS],
                        catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return out, cfg


@slow
def test_desk_scale_critical_point(tfim_p_scan):
    out, cfg = tfim_p_scan
    runner = CliRunner()
    res = runner.invoke(main, ["crossing", "--config", str(cfg)], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    rows = (out / "crossings.csv").read_text().strip().splitlines()
    extra = [r for r in rows if r.startswith("extrapolated")][0].split(",")
    p_c, err = float(extra[3]), float(extra[4])
    ok = abs(p_c - 0.667) <= 0.02
    report("desk-scale-critical-point", ok, f"p_c {p_c:.4f}+-{err:.4f} vs 0.667+-0.02")


@slow
def test_desk_scale_collapse(tfim_p_scan):
    out, cfg = tfim_p_scan
    runner = CliRunner()
    res = runner.invoke(main, ["collapse", "--config", str(cfg)], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    payload = json.loads((out / "collapse.json").read_text())
    ok = abs(payload["beta_over_nu"] - 0.40) <= 0.06
    report(
        "desk-scale-collapse", ok,
        f"beta/nu {payload['beta_over_nu']:.4f}+-{payload['beta_over_nu_err']:.4f} "
        f"vs 0.40+-0.06 (p_c {payload['x_c']:.4f}, nu {payload['nu']:.4f})",
    )


def test_synthetic_collapse_recovery():
    # companion property to criterion 6: planted exponents recovered within 5%
    from mdite.analysis import Curve, data_collapse

    rng = np.random.default_rng(7)
    x_c, nu, bon = 0.5, 1.1, 0.4
    curves = []
    for L in (12, 16, 24, 32):
        x = np.linspace(0.44, 0.56, 13)
        z = (x - x_c) / x_c * L ** (1 / nu)
        y = (1.2 * np.exp(-((z / 5) ** 2)) + 0.1 - 0.02 * z) * L ** (-bon)
        err = np.full_like(x, 0.003 * L ** (-bon))
        curves.append(Curve(L, x, y + rng.normal(size=len(x)) * err, err))
    fit = data_collapse(curves, 0.52, 1.0, 0.45, n_boot=30, n_starts=6, seed=8)
    ok = (
        abs(fit.x_c - x_c) / x_c <= 0.05
        and abs(fit.nu - nu) / nu <= 0.05
        and abs(fit.beta_over_nu - bon) / bon <= 0.05
    )
    report("synthetic-collapse-recovery", ok,
           f"x_c {fit.x_c:.4f}, nu {fit.nu:.4f}, beta/nu {fit.beta_over_nu:.4f}")


# ---------------------------------------------------------------------------
# Criterion 7: secondary transitions in tau and h (slow)
# ---------------------------------------------------------------------------

SCAN_TAU_CFG = """
[model]
kind = "tfim"
L = 16
h = 2.5

[protocol]
tau = 0.265
p = 0.5
n_d = "auto"

[sampler]
sweeps = 60000
equilibration = 8000
chains = 2
seed = 31

[scan]
axis = "tau"
values = [0.23, 0.25, 0.27, 0.29, 0.31]
sizes = [16, 24, 32]

[crossing]
csv = "{out}/scan.csv"

[output]
directory = "{out}"
"""

SCAN_H_CFG = """
[model]
kind = "tfim"
L = 16
h = 1.84

[protocol]
tau = 1.2
p = 0.8
n_d = "auto"

[sampler]
sweeps = 60000
equilibration = 8000
chains = 2
seed = 32

[scan]
axis = "h"
values = [1.76, 1.80, 1.84, 1.88, 1.92]
sizes = [16, 24, 32]

[crossing]
csv = "{out}/scan.csv"

[output]
directory = "{out}"
"""


def run_scan_crossing(tmp_path, cfg_text):
    cfg = tmp_path / "scan.toml"
    cfg.write_text(cfg_text.format(out=tmp_path))
    runner = CliRunner()
    res = runner.invoke(main, ["scan", "--config", str(cfg), "--threads", THREADS],
                        catch_exceptions=False)
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["crossing", "--config", str(cfg)], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    rows = (tmp_path / "crossings.csv").read_text().strip().splitlines()
    extra = [r for r in rows if r.startswith("extrapolated")][0].split(",")
    return float(extra[3]), float(extra[4])


@slow
def test_secondary_transition_tau(tmp_path):
    tau_c, err = run_scan_crossing(tmp_path, SCAN_TAU_CFG)
    ok = 0.24 <= tau_c <= 0.29
    report("secondary-transition-tau", ok, f"tau_c {tau_c:.4f}+-{err:.4f} vs [0.24, 0.29]")


@slow
def test_secondary_transition_h(tmp_path):
    h_c, err = run_scan_crossing(tmp_path, SCAN_H_CFG)
    ok = 1.78 <= h_c <= 1.90
    report("secondary-transition-h", ok, f"h_c {h_c:.4f}+-{err:.4f} vs [1.78, 1.90]")


# ---------------------------------------------------------------------------
# Criterion 8: CDHM crossing (extended runtime, slow)
# ---------------------------------------------------------------------------

SCAN_CDHM_CFG = """
[model]
kind = "cdhm"
L = 8
g = 3.5
lattice = "columnar"

[protocol]
tau = 1.0
p = 0.354
n_d = "auto"

[sampler]
sweeps = 60000
equilibration = 8000
chains = 2
seed = 33

[scan]
axis = "p"
values = [0.30, 0.32, 0.34, 0.36, 0.38, 0.40]
sizes = [8, 12, 16]

[crossing]
csv = "{out}/scan.csv"

[output]
directory = "{out}"
"""


@slow
def test_cdhm_crossing(tmp_path):
    p_c, err = run_scan_crossing(tmp_path, SCAN_CDHM_CFG)
    ok = 0.32 <= p_c <= 0.39
    report("cdhm-crossing", ok, f"p_c {p_c:.4f}+-{err:.4f} vs [0.32, 0.39]")


# ---------------------------------------------------------------------------
# Criterion 9: invariant suite
# ---------------------------------------------------------------------------

def test_invariant_suite():
    failures = []

    # weight positivity + worldline consistency, both models, every sweep
    tfim = ModelSpec(kind=TFIM, lattice=build_chain_lattice(6), h=1.8)
    cdhm = ModelSpec(kind=CDHM, lattice=build_columnar_rect(4, 2), g=3.5)
    for model, p in ((tfim, 0.66), (cdhm, 0.5)):
        sampler = SseSampler(model, ProtocolParams(tau=1.0, p=p, n_layers=3),
                             seed=105, debug_checks=True)
        try:
            for _ in range(400):
                sampler.sweep()
                sampler.adjust_truncation()
        except AssertionError as exc:
            failures.append(f"consistency {model.kind}: {exc}")

    # R2 >= 1 - 3 sigma and <m> = 0 within 3 sigma
    proto = ProtocolParams(tau=1.0, p=0.66, n_layers=4)
    series = run_chain(tfim, proto, sweeps=60_000, equilibration=4_000, seed=106)
    r2 = binder_ratio(make_bins(series.channels()))
    if not r2.mean >= 1.0 - 3 * r2.error:
        failures.append(f"R2 {r2.mean} < 1 - 3 sigma")
    msym = binned_estimate(series.m_signed)
    if not abs(msym.mean) <= 3 * msym.error:
        failures.append(f"<m> {msym.mean}+-{msym.error} not consistent with 0")

    # merge-split probability formulas at p in {0, 0.5, 1}
    for p, expect in ((0.0, (0.0, 1.0)), (0.5, (1.0, 1.0)), (1.0, (1.0, 0.0))):
        if merge_split_probabilities(p) != expect:
            failures.append(f"merge-split formulas wrong at p={p}")

    # channel tolerances: trace / Hermiticity 1e-12, eigenvalue floor -1e-10
    rho = oracle.maximally_mixed(4)
    proto1 = ProtocolParams(tau=1.0, p=0.66, n_layers=1)
    for _ in range(6):
        rho = oracle.mdite_step(rho, tfim4 := ModelSpec(kind=TFIM,
                                lattice=build_chain_lattice(4), h=1.8), proto1)
        try:
            oracle.check_density_matrix(rho)
        except ValueError as exc:
            failures.append(f"channel contract: {exc}")
            break

    report("invariant-suite", not failures, "; ".join(failures) or "all invariants hold")


# ---------------------------------------------------------------------------
# Criterion 10: cluster-size diagnostic grows with p
# ---------------------------------------------------------------------------

def test_cluster_diagnostic():
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(24), h=1.8)
    n_d = auto_depth(24, 1.0)
    samples = {}
    for p in (0.2, 0.5, 0.8):
        proto = ProtocolParams(tau=1.0, p=p, n_layers=n_d)
        series = run_chain(model, proto, sweeps=6_000, equilibration=2_000, seed=107)
        bins = series.cluster_frac[: 6_000 - 6_000 % 60].reshape(60, -1).mean(axis=1)
        samples[p] = bins
    means = {p: float(v.mean()) for p, v in samples.items()}
    increasing = means[0.2] < means[0.5] < means[0.8]
    p1 = mannwhitneyu(samples[0.2], samples[0.5], alternative="less").pvalue
    p2 = mannwhitneyu(samples[0.5], samples[0.8], alternative="less").pvalue
    ok = increasing and p1 < 0.01 and p2 < 0.01
    report(
        "cluster-diagnostic", ok,
        f"means {means[0.2]:.4f} < {means[0.5]:.4f} < {means[0.8]:.4f}, "
        f"Mann-Whitney p: {p1:.2g}, {p2:.2g}",
    )
