"""Exact dense reference implementation of the measurement-dressed ITE channel.

Everything here is brute force on the full 2^N Hilbert space: the
Hamiltonian matrix, the imaginary-time propagator by spectral
decomposition, the measurement-averaged dephasing channel, the layer map
and its fixed point, diagonal observables, and the exhaustive enumeration
of measurement patterns with their ensemble weights.  This module is the
ground truth for every Monte Carlo acceptance test, so it stays simple
and obviously correct rather than fast.

Basis convention: computational state ``s`` in ``0 .. 2^N - 1``; bit i of
``s`` is site i, with bit 0 meaning spin +1 and bit 1 meaning spin -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import CDHM, TFIM, ModelSpec, ProtocolParams

DENSE_SITE_CAP = 12
PATTERN_FLAG_CAP = 20

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_FLOOR = -1e-10


class CapacityError(ValueError):
    """System too large for the dense/enumeration path."""


class NumericError(ArithmeticError):
    """Trace underflow or other loss of numeric meaning."""


def spin_values(n_sites: int) -> np.ndarray:
    """(2^N, N) array of +-1 spins per basis state."""
    states = np.arange(2**n_sites)
    bits = (states[:, None] >> np.arange(n_sites)[None, :]) & 1
    return 1 - 2 * bits


def magnetization_per_state(model: ModelSpec) -> np.ndarray:
    """m(s) for every basis state (extensive sum, staggered for CDHM)."""
    spins = spin_values(model.n_sites)
    if model.kind == TFIM:
        return spins.sum(axis=1).astype(np.float64)
    signs = model.lattice.stagger_signs()
    return (spins * signs[None, :]).sum(axis=1).astype(np.float64)


def maximally_mixed(n_sites: int) -> np.ndarray:
    dim = 2**n_sites
    return np.eye(dim, dtype=np.float64) / dim


def check_density_matrix(rho: np.ndarray) -> None:
    """Assert the Hermiticity / unit-trace / positivity contract."""
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        raise ValueError("density matrix not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < POSITIVITY_FLOOR:
        raise ValueError("density matrix has a negative eigenvalue beyond the floor")


def build_hamiltonian_matrix(model: ModelSpec, site_cap: int = DENSE_SITE_CAP) -> np.ndarray:
    """Dense Hamiltonian in the Z basis.

    TFIM: ``-sum_b J_b Z Z - h sum_i X``.  CDHM: ``sum_b J_b S.S`` (the
    physical antiferromagnet; the SSE-side sublattice rotation does not
    change any Z-diagonal observable, so the oracle uses the bare signs).
    """
    n = model.n_sites
    if n > site_cap:
        raise CapacityError(f"dense oracle capped at {site_cap} sites, got {n}")
    dim = 2**n
    spins = spin_values(n)
    H = np.zeros((dim, dim), dtype=np.float64)
    couplings = model.bond_couplings()
    bonds = model.lattice.bond_array()
    if model.kind == TFIM:
        diag = np.zeros(dim)
        for (a, b), Jb in zip(bonds, couplings):
            diag -= Jb * spins[:, a] * spins[:, b]
        H[np.diag_indices(dim)] = diag
        for i in range(n):
            flipped = np.arange(dim) ^ (1 << i)
            H[flipped, np.arange(dim)] -= model.h
    else:
        diag = np.zeros(dim)
        states = np.arange(dim)
        for (a, b), Jb in zip(bonds, couplings):
            diag += 0.25 * Jb * spins[:, a] * spins[:, b]
            anti = spins[:, a] != spins[:, b]
            exchanged = states[anti] ^ ((1 << int(a)) | (1 << int(b)))
            H[exchanged, states[anti]] += 0.5 * Jb
        H[np.diag_indices(dim)] += diag
    return H


def ite_propagator(H: np.ndarray, t: float) -> np.ndarray:
    """e^{-t H} by spectral decomposition; requires Hermitian H and t >= 0."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    if np.max(np.abs(H - H.conj().T)) > 1e-10:
        raise ValueError("propagator input must be Hermitian")
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-t * w)[None, :]) @ V.conj().T


def dephase_channel(rho: np.ndarray, p: float, sites: list[int] | None = None) -> np.ndarray:
    """Measurement-averaged channel: per listed site, keep the off-diagonal
    elements that flip that site's bit with weight (1-p).

    Applying the single-site map ``rho -> (1-p) rho + p sum_s P_s rho P_s``
    independently per site multiplies element (s', s) by
    ``(1-p)**(number of listed sites whose bits differ)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("measurement rate must lie in [0, 1]")
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if sites is None:
        sites = list(range(n))
    if not sites or p == 0.0:
        return rho.copy()
    states = np.arange(dim)
    diff = states[:, None] ^ states[None, :]
    mask = np.zeros((dim, dim), dtype=np.int64)
    for i in sites:
        mask += (diff >> i) & 1
    if p == 1.0:
        return np.where(mask == 0, rho, 0.0)
    return rho * (1.0 - p) ** mask


def mdite_step(
    rho: np.ndarray, model: ModelSpec, protocol: ProtocolParams, propagator: np.ndarray | None = None
) -> np.ndarray:
    """One protocol layer: dephase all sites at rate p, sandwich with
    e^{-tau H / 2}, renormalize the trace."""
    if propagator is None:
        H = build_hamiltonian_matrix(model)
        propagator = ite_propagator(H, protocol.tau / 2)
    out = propagator @ dephase_channel(rho, protocol.p) @ propagator
    tr = np.trace(out).real
    if tr < 1e-300:
        raise NumericError("trace underflow in layer map")
    return out / tr


def evolve(model: ModelSpec, protocol: ProtocolParams) -> np.ndarray:
    """State after exactly n_layers of the protocol, from the maximally mixed input."""
    P = ite_propagator(build_hamiltonian_matrix(model), protocol.tau / 2)
    rho = maximally_mixed(model.n_sites)
    for _ in range(protocol.n_layers):
        rho = mdite_step(rho, model, protocol, propagator=P)
    return rho


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


@dataclass
class StationaryResult:
    rho: np.ndarray
    iterations: int
    residual: float
    converged: bool


def iterate_to_stationary(
    model: ModelSpec,
    protocol: ProtocolParams,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> StationaryResult:
    """Iterate the layer map until consecutive states agree in trace distance."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    P = ite_propagator(build_hamiltonian_matrix(model), protocol.tau / 2)
    rho = maximally_mixed(model.n_sites)
    residual = np.inf
    for k in range(1, max_iters + 1):
        nxt = mdite_step(rho, model, protocol, propagator=P)
        residual = trace_distance(nxt, rho)
        rho = nxt
        if residual < tol:
            return StationaryResult(rho, k, residual, True)
    return StationaryResult(rho, max_iters, residual, False)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactObservables:
    """Diagonal-distribution moments of the order parameter.

    ``m_abs/m2/m4`` are extensive (m = sum of spins); the ``*_density``
    fields divide by N, N^2, N^4 so they match the sampler's intensive
    records.  ``binder`` is scale invariant.
    """

    m_abs: float
    m2: float
    m4: float
    binder: float
    n_sites: int

    @property
    def m_abs_density(self) -> float:
        return self.m_abs / self.n_sites

    @property
    def m2_density(self) -> float:
        return self.m2 / self.n_sites**2

    @property
    def m4_density(self) -> float:
        return self.m4 / self.n_sites**4


def exact_observables(rho: np.ndarray, model: ModelSpec) -> ExactObservables:
    """Moments of m over the diagonal probability distribution of rho."""
    q = np.clip(np.diag(rho).real, 0.0, None)
    q = q / q.sum()
    m = magnetization_per_state(model)
    m2 = float(q @ m**2)
    m4 = float(q @ m**4)
    if m2 == 0.0:
        raise ValueError("m2 vanishes; Binder ratio undefined")
    return ExactObservables(
        m_abs=float(q @ np.abs(m)),
        m2=m2,
        m4=m4,
        binder=m4 / m2**2,
        n_sites=model.n_sites,
    )


def thermal_observables(model: ModelSpec, beta: float) -> ExactObservables:
    """Same moments for the Gibbs state e^{-beta H} / Z."""
    H = build_hamiltonian_matrix(model)
    w, V = np.linalg.eigh(H)
    boltz = np.exp(-beta * (w - w.min()))
    rho = (V * boltz[None, :]) @ V.conj().T
    return exact_observables(rho / np.trace(rho).real, model)


# ---------------------------------------------------------------------------
# Measurement-pattern enumeration and flag marginals
# ---------------------------------------------------------------------------

def _pattern_trace(
    model: ModelSpec, protocol: ProtocolParams, pattern: np.ndarray, P: np.ndarray
) -> float:
    """Unnormalized trace of the evolution with a fixed measurement pattern.

    ``pattern[l-1, i]`` says whether site i is projectively measured at
    boundary l (between layers l and l+1); measured sites get the full
    dephasing, unmeasured sites none.
    """
    rho = maximally_mixed(model.n_sites)
    rho = P @ rho @ P
    for l in range(1, protocol.n_layers):
        sites = [int(i) for i in np.nonzero(pattern[l - 1])[0]]
        rho = dephase_channel(rho, 1.0, sites) if sites else rho
        rho = P @ rho @ P
    return float(np.trace(rho).real)


def enumerate_pattern_distribution(
    model: ModelSpec, protocol: ProtocolParams
) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive ensemble distribution over measurement patterns.

    Returns ``(patterns, probs)`` with ``patterns`` of shape
    ``(2**n_flags, n_layers-1, n_sites)`` (boolean) and ``probs`` the
    normalized ensemble weights  p^{#measured} (1-p)^{#unmeasured} * Q.
    """
    n = model.n_sites
    n_bound = protocol.n_layers - 1
    n_flags = n * n_bound
    if n_flags > PATTERN_FLAG_CAP:
        raise CapacityError(f"pattern enumeration capped at {PATTERN_FLAG_CAP} flags, got {n_flags}")
    P = ite_propagator(build_hamiltonian_matrix(model), protocol.tau / 2)
    count = 2**n_flags
    patterns = np.zeros((count, max(n_bound, 1), n), dtype=bool)
    weights = np.zeros(count)
    p = protocol.p
    for code in range(count):
        bits = (code >> np.arange(n_flags)) & 1
        pattern = bits.reshape(n_bound, n).astype(bool) if n_bound else np.zeros((1, n), bool)
        k = int(bits.sum())
        prior = p**k * (1.0 - p) ** (n_flags - k)
        if prior == 0.0:
            continue
        patterns[code] = pattern
        weights[code] = prior * _pattern_trace(model, protocol, pattern, P)
    total = weights.sum()
    if total <= 0:
        raise NumericError("all pattern weights vanished")
    return patterns, weights / total


def _averaged_trace(
    model: ModelSpec,
    protocol: ProtocolParams,
    P: np.ndarray,
    forced: tuple[int, int] | None = None,
) -> float:
    """Unnormalized trace of the measurement-averaged evolution.

    With ``forced=(l, i)`` the channel at boundary l, site i is replaced
    by ``p * (full dephasing)``, giving the joint weight of that flag
    being set; by linearity the ratio to the unforced trace is the flag's
    measured marginal.
    """
    p = protocol.p
    rho = maximally_mixed(model.n_sites)
    rho = P @ rho @ P
    for l in range(1, protocol.n_layers):
        if forced is not None and forced[0] == l:
            others = [i for i in range(model.n_sites) if i != forced[1]]
            rho = p * dephase_channel(rho, 1.0, [forced[1]])
            rho = dephase_channel(rho, p, others)
        else:
            rho = dephase_channel(rho, p)
        rho = P @ rho @ P
    return float(np.trace(rho).real)


def flag_marginals(model: ModelSpec, protocol: ProtocolParams) -> np.ndarray:
    """P(site i measured at boundary l) under the extended ensemble.

    Shape (n_layers - 1, n_sites).  Linear in each flag, so each entry
    needs one forced evolution instead of the full pattern enumeration.
    """
    P = ite_propagator(build_hamiltonian_matrix(model), protocol.tau / 2)
    denom = _averaged_trace(model, protocol, P)
    out = np.zeros((protocol.n_layers - 1, model.n_sites))
    for l in range(1, protocol.n_layers):
        for i in range(model.n_sites):
            out[l - 1, i] = _averaged_trace(model, protocol, P, forced=(l, i)) / denom
    return out
