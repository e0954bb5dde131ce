"""Configuration state of the extended-ensemble SSE sampler.

Geometry.  For depth ``n_d`` the trace diagram is, per site, a closed
imaginary-time circle of circumference ``n_d * tau`` split into
``n_seg = 2 * n_d`` uniform segments of length ``tau / 2`` (the ket and
bra halves of each layer).  Junction ``j`` sits at the bottom of segment
``j``:

* junction 0           -- the maximally-mixed insertion point (always free),
* junction n_d         -- the trace closure (always free, the default
                          observable slice: its spins are distributed as
                          the diagonal of the output state),
* junctions l / 2n_d-l -- the ket / bra contact points of measurement
                          boundary ``l`` (l = 1 .. n_d-1).

A measured flag at (site, boundary l) constrains the spins at junctions
l and 2n_d-l to be equal and carries weight p; an unmeasured flag
carries weight 1-p and no constraint.  Each segment holds an operator
string of truncation M expanded at beta = tau/2, with the usual
``(tau/2)^n (M-n)!/M!`` weight times the product of matrix elements.

Operator encoding: ``op_cls`` is -1 null, 0 diagonal site, 1 off-diagonal
site, 2 diagonal bond, 3 off-diagonal bond; ``op_loc`` is the site or
bond index.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from ..models import CDHM, TFIM, ModelSpec, ProtocolParams, operator_table

OP_NULL = -1
OP_SITE_DIAG = 0
OP_SITE_OFF = 1
OP_BOND_DIAG = 2
OP_BOND_OFF = 3

KIND_TFIM = 0
KIND_CDHM = 1


class ConsistencyError(AssertionError):
    """Internal bug trap: the configuration violates a structural invariant."""


def insertion_probability(beta: float, n_candidates: int, element: float, free_slots: int) -> float:
    """Diagonal-insertion acceptance min{beta * N_b * <a|H_b|a> / (M - n), 1}.

    ``free_slots = M - n`` counts current nulls; a zero matrix element
    never inserts.
    """
    if free_slots <= 0 or element <= 0.0:
        return 0.0
    return min(beta * n_candidates * element / free_slots, 1.0)


def removal_probability(beta: float, n_candidates: int, element: float, free_slots: int) -> float:
    """Diagonal-removal acceptance min{(M - n + 1) / (beta * N_b * <a|H_b|a>), 1}
    with ``free_slots = M - n + 1`` counting nulls after the removal."""
    denom = beta * n_candidates * element
    if denom <= 0.0:
        return 1.0
    return min(free_slots / denom, 1.0)


def merge_split_probabilities(p: float) -> tuple[float, float]:
    """(P_merge, P_split) = (min{p/(1-p), 1}, min{(1-p)/p, 1})."""
    if p >= 1.0:
        return 1.0, 0.0
    if p <= 0.0:
        return 0.0, 1.0
    return min(p / (1.0 - p), 1.0), min((1.0 - p) / p, 1.0)


@dataclass
class ModelData:
    """Flat, kernel-ready view of a ModelSpec."""

    kind: int
    n_sites: int
    bonds: np.ndarray          # (n_bonds, 2) int32
    bond_diag_aligned: np.ndarray
    bond_diag_anti: np.ndarray
    site_weight: float
    has_site_ops: bool
    signs: np.ndarray          # +-1 per site for the order parameter

    @classmethod
    def from_spec(cls, model: ModelSpec) -> "ModelData":
        table = operator_table(model)
        lat = model.lattice
        if model.kind == TFIM:
            signs = np.ones(lat.n_sites, dtype=np.int8)
        else:
            signs = lat.stagger_signs().astype(np.int8)
        return cls(
            kind=KIND_TFIM if model.kind == TFIM else KIND_CDHM,
            n_sites=lat.n_sites,
            bonds=lat.bond_array().astype(np.int32),
            bond_diag_aligned=np.ascontiguousarray(table.bond_aligned, dtype=np.float64),
            bond_diag_anti=np.ascontiguousarray(table.bond_anti, dtype=np.float64),
            site_weight=float(table.site_diag),
            has_site_ops=table.has_site_ops,
            signs=signs,
        )

    @property
    def n_candidates(self) -> int:
        """Diagonal insertion locations: bonds, plus sites when site ops exist."""
        return self.bonds.shape[0] + (self.n_sites if self.has_site_ops else 0)


def chain_generator(master_seed: int, chain_index: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based per-chain stream: Philox keyed by (master_seed, chain,
    stream); `stream` separates grid points in scans."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(chain_index, stream))
    return np.random.Generator(np.random.Philox(seed=ss))


@dataclass
class SseState:
    model: ModelSpec
    protocol: ProtocolParams
    data: ModelData
    op_cls: np.ndarray       # (n_seg, M) int8
    op_loc: np.ndarray       # (n_seg, M) int32
    nops: np.ndarray         # (n_seg,) int64
    jspins: np.ndarray       # (n_seg, n_sites) int8
    flags: np.ndarray        # (n_d - 1, n_sites) bool
    rng: np.random.Generator
    sweep_count: int = 0

    @property
    def n_layers(self) -> int:
        return self.protocol.n_layers

    @property
    def n_segments(self) -> int:
        return self.op_cls.shape[0]

    @property
    def truncation(self) -> int:
        return self.op_cls.shape[1]

    @property
    def beta_segment(self) -> float:
        return self.protocol.tau / 2.0

    def trace_slice(self) -> np.ndarray:
        """Spins at the trace-closure junction (diagonal of the output state)."""
        return self.jspins[self.n_layers]

    # -- structural checks -------------------------------------------------

    def propagate_segment(self, j: int) -> np.ndarray:
        """Push the bottom-junction spins of segment j through its string."""
        state = self.jspins[j].astype(np.int8).copy()
        bonds = self.data.bonds
        for q in range(self.truncation):
            cls = self.op_cls[j, q]
            if cls == OP_SITE_OFF:
                state[self.op_loc[j, q]] *= -1
            elif cls == OP_BOND_OFF:
                a, b = bonds[self.op_loc[j, q]]
                state[a] *= -1
                state[b] *= -1
        return state

    def check_worldlines(self) -> None:
        """Bug trap: junction sheets must agree with operator propagation,
        measured junction pairs must be pinned, and all vertices must sit
        on nonzero matrix elements."""
        n_seg = self.n_segments
        for j in range(n_seg):
            out = self.propagate_segment(j)
            nxt = self.jspins[(j + 1) % n_seg]
            if not np.array_equal(out, nxt):
                raise ConsistencyError(f"segment {j} propagation mismatch")
        n_d = self.n_layers
        for l in range(1, n_d):
            measured = self.flags[l - 1]
            ket, bra = self.jspins[l], self.jspins[n_seg - l]
            if not np.array_equal(ket[measured], bra[measured]):
                raise ConsistencyError(f"pinch violated at boundary {l}")
        if np.any(self.nops != np.sum(self.op_cls != OP_NULL, axis=1)):
            raise ConsistencyError("operator counts out of sync")
        if not np.isfinite(self.log_weight()):
            raise ConsistencyError("configuration has vanishing weight")

    def log_weight(self) -> float:
        """log of the (unnormalized) configuration weight; -inf if forbidden."""
        beta = self.beta_segment
        M = self.truncation
        total = 0.0
        for j in range(self.n_segments):
            n = int(self.nops[j])
            if n > 0 and beta == 0.0:
                return -np.inf
            total += (n * np.log(beta) if n else 0.0) + lgamma(M - n + 1) - lgamma(M + 1)
            state = self.jspins[j].astype(np.int8).copy()
            for q in range(M):
                cls = self.op_cls[j, q]
                if cls == OP_NULL:
                    continue
                loc = self.op_loc[j, q]
                if cls == OP_SITE_DIAG or cls == OP_SITE_OFF:
                    w = self.data.site_weight
                    if cls == OP_SITE_OFF:
                        state[loc] *= -1
                else:
                    a, b = self.data.bonds[loc]
                    aligned = state[a] == state[b]
                    w = (
                        self.data.bond_diag_aligned[loc]
                        if aligned
                        else self.data.bond_diag_anti[loc]
                    )
                    if cls == OP_BOND_OFF:
                        # exchange acts only on anti-aligned pairs
                        w = 0.0 if aligned else self.data.bond_diag_anti[loc]
                        state[a] *= -1
                        state[b] *= -1
                if w <= 0.0:
                    return -np.inf
                total += np.log(w)
        p = self.protocol.p
        n_meas = int(self.flags.sum())
        n_total = self.flags.size
        if (p == 0.0 and n_meas > 0) or (p == 1.0 and n_meas < n_total):
            return -np.inf
        if 0.0 < p < 1.0:
            total += n_meas * np.log(p) + (n_total - n_meas) * np.log(1.0 - p)
        return total


def init_state(
    model: ModelSpec,
    protocol: ProtocolParams,
    seed: int | np.random.Generator,
    initial_truncation: int = 16,
) -> SseState:
    """Fresh configuration: empty strings, iid Bernoulli(p) flags, one random
    spin value per site replicated around its circle (no operators means
    every site's worldline is a single free loop)."""
    rng = seed if isinstance(seed, np.random.Generator) else chain_generator(int(seed))
    data = ModelData.from_spec(model)
    n_d = protocol.n_layers
    n_seg = 2 * n_d
    M = max(16, int(initial_truncation))
    op_cls = np.full((n_seg, M), OP_NULL, dtype=np.int8)
    op_loc = np.zeros((n_seg, M), dtype=np.int32)
    nops = np.zeros(n_seg, dtype=np.int64)
    site_spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=data.n_sites)
    jspins = np.tile(site_spins, (n_seg, 1))
    flags = rng.random((max(n_d - 1, 1), data.n_sites)) < protocol.p
    if n_d == 1:
        flags = np.zeros((0, data.n_sites), dtype=bool)
    else:
        flags = flags[: n_d - 1]
    return SseState(
        model=model,
        protocol=protocol,
        data=data,
        op_cls=op_cls,
        op_loc=op_loc,
        nops=nops,
        jspins=np.ascontiguousarray(jspins),
        flags=np.ascontiguousarray(flags),
        rng=rng,
    )
