"""Stationary-distribution correctness of the extended-ensemble sampler:
every estimated observable and flag marginal must match the dense channel
oracle within statistical error on small systems.  The full acceptance
criteria run the same comparisons harder in test_acceptance.py."""

import numpy as np
import pytest

from mdite import oracle
from mdite.estimators import binned_estimate, binder_ratio, make_bins
from mdite.models import CDHM, TFIM, LatticeSpec, ModelSpec, ProtocolParams, build_chain_lattice
from mdite.sse import run_chain


def dimer_chain(g=3.5):
    lat = LatticeSpec(
        n_sites=4,
        bonds=((0, 1), (1, 2), (2, 3), (0, 3)),
        bond_class=(1, 0, 1, 0),
        bond_scale=(1.0,) * 4,
        coords=((0, 0), (1, 0), (2, 0), (3, 0)),
        geometry_tag="explicit",
    )
    return ModelSpec(kind=CDHM, lattice=lat, g=g)


def assert_moments_match(series, ref, n_sigma=3.0):
    for name, channel, exact in [
        ("m_abs", series.m_abs, ref.m_abs_density),
        ("m2", series.m2, ref.m2_density),
        ("m4", series.m4, ref.m4_density),
    ]:
        est = binned_estimate(channel)
        assert abs(est.mean - exact) < n_sigma * est.error, (
            f"{name}: sse {est.mean:.5f} +- {est.error:.5f} vs exact {exact:.5f}"
        )


def assert_flags_match(series, marg, n_sigma=3.0):
    hist = series.flag_history.reshape(len(series), -1).astype(np.float64)
    for k in range(hist.shape[1]):
        est = binned_estimate(hist[:, k])
        exact = marg.ravel()[k]
        assert abs(est.mean - exact) < n_sigma * est.error, (
            f"flag {k}: sse {est.mean:.5f} +- {est.error:.5f} vs exact {exact:.5f}"
        )


def test_tfim_finite_depth_matches_oracle():
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(3), h=1.8)
    proto = ProtocolParams(tau=1.0, p=0.66, n_layers=3)
    series = run_chain(model, proto, sweeps=60000, equilibration=4000, seed=11,
                       track_flag_marginals=True)
    ref = oracle.exact_observables(oracle.evolve(model, proto), model)
    assert_moments_match(series, ref)
    assert_flags_match(series, oracle.flag_marginals(model, proto))


def test_cdhm_finite_depth_matches_oracle():
    model = dimer_chain()
    proto = ProtocolParams(tau=1.0, p=0.5, n_layers=3)
    series = run_chain(model, proto, sweeps=60000, equilibration=4000, seed=12,
                       track_flag_marginals=True)
    ref = oracle.exact_observables(oracle.evolve(model, proto), model)
    assert_moments_match(series, ref)
    assert_flags_match(series, oracle.flag_marginals(model, proto))


def test_p0_reduces_to_thermal():
    # p=0, n_d layers of tau is the Gibbs state at beta = n_d tau; also check
    # a different segmentation of the same total imaginary time agrees
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(4), h=1.8)
    ref = oracle.thermal_observables(model, beta=2.0)
    a = run_chain(model, ProtocolParams(tau=0.5, p=0.0, n_layers=4),
                  sweeps=40000, equilibration=3000, seed=13)
    b = run_chain(model, ProtocolParams(tau=1.0, p=0.0, n_layers=2),
                  sweeps=40000, equilibration=3000, seed=14)
    assert_moments_match(a, ref)
    ea, eb = binned_estimate(a.m2), binned_estimate(b.m2)
    assert abs(ea.mean - eb.mean) < 3 * np.hypot(ea.error, eb.error)


def test_tiny_tau_is_maximally_mixed():
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(6), h=1.8)
    proto = ProtocolParams(tau=1e-6, p=0.5, n_layers=3)
    series = run_chain(model, proto, sweeps=30000, equilibration=500, seed=15)
    est = binder_ratio(make_bins(series.channels()))
    assert abs(est.mean - (3 - 2 / 6)) < 3 * est.error


def test_magnetization_symmetric_zero():
    # global spin-flip symmetry: <m> consistent with zero
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(4), h=1.8)
    proto = ProtocolParams(tau=1.0, p=0.66, n_layers=4)
    series = run_chain(model, proto, sweeps=50000, equilibration=3000, seed=16)
    est = binned_estimate(series.m_signed)
    assert abs(est.mean) < 3 * est.error


def test_binder_at_least_one():
    for p in (0.2, 0.8):
        model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(4), h=1.8)
        proto = ProtocolParams(tau=1.0, p=p, n_layers=4)
        series = run_chain(model, proto, sweeps=30000, equilibration=2000, seed=17)
        est = binder_ratio(make_bins(series.channels()))
        assert est.mean >= 1.0 - 3 * est.error


def test_free_slice_mode_valid_at_stationarity():
    # the input seam is the output slice of the cyclically rotated protocol:
    # averaging it with the trace slice must agree with the stationary oracle
    model = ModelSpec(kind=TFIM, lattice=build_chain_lattice(3), h=1.8)
    proto = ProtocolParams(tau=1.0, p=0.66, n_layers=12)
    stat = oracle.iterate_to_stationary(model, ProtocolParams(tau=1.0, p=0.66, n_layers=1))
    ref = oracle.exact_observables(stat.rho, model)
    series = run_chain(model, proto, sweeps=40000, equilibration=3000, seed=18,
                       slice_mode="free")
    est = binned_estimate(series.m2)
    assert abs(est.mean - ref.m2_density) < 3 * est.error


def test_cdhm_p0_reduces_to_thermal():
    # unmeasured Heisenberg layers compose into one thermal strip at
    # beta = n_d * tau, including the staggered-observable path
    model = dimer_chain(g=2.0)
    proto = ProtocolParams(tau=0.5, p=0.0, n_layers=4)
    series = run_chain(model, proto, sweeps=40000, equilibration=3000, seed=19)
    assert float(series.flag_frac.max()) == 0.0
    ref = oracle.thermal_observables(model, beta=2.0)
    assert_moments_match(series, ref)
