"""Sweep composition, truncation growth and sampling loops.

A sweep is: diagonal update, merge-split over the measurement flags,
the model's nonlocal update (Ising clusters or Heisenberg loops), then a
measurement.  Order-parameter moments are recorded as densities
(m = sum of signed spins / N) at the trace-closure junction by default:
its marginal is exactly the diagonal of the protocol's output state.
``slice_mode="free"`` additionally averages in the input-seam junction,
the other measurement-free point of the trace circle, whose marginal is
the output of the cyclically rotated protocol (identical at
stationarity).  Slices at measured boundaries are NOT valid output
observables: the future part of the trace reweights them, which the
dense oracle confirms, so no such mode is offered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from ..models import CDHM, ModelSpec, ProtocolParams
from . import kernels
from .state import KIND_TFIM, ConsistencyError, SseState, chain_generator, init_state


def grown_truncation(n: int, M: int) -> int:
    """Growth policy: exceed three quarters full -> ceil(4n/3); never shrink."""
    if n > (3 * M) // 4 and 3 * n > 0:
        return max(M, ceil(4 * n / 3))
    return M


@dataclass
class SampleSeries:
    """Per-sweep observable records from one chain."""

    m_signed: np.ndarray
    m_abs: np.ndarray
    m2: np.ndarray
    m4: np.ndarray
    flag_frac: np.ndarray
    n_ops: np.ndarray
    cluster_frac: np.ndarray
    flag_history: np.ndarray | None = None  # (sweeps, n_bound, n_sites) uint8

    def __len__(self) -> int:
        return len(self.m2)

    def channels(self) -> dict[str, np.ndarray]:
        return {
            "m_signed": self.m_signed,
            "m_abs": self.m_abs,
            "m2": self.m2,
            "m4": self.m4,
            "flag_frac": self.flag_frac,
            "n_ops": self.n_ops,
            "cluster_frac": self.cluster_frac,
        }


class SseSampler:
    """Owns one SseState plus the reusable update buffers."""

    def __init__(
        self,
        model: ModelSpec,
        protocol: ProtocolParams,
        seed: int | np.random.Generator,
        initial_truncation: int = 16,
        slice_mode: str = "trace",
        debug_checks: bool = False,
    ) -> None:
        if slice_mode not in ("trace", "free"):
            raise ValueError("slice_mode must be 'trace' or 'free'")
        self.state = init_state(model, protocol, seed, initial_truncation)
        self.slice_mode = slice_mode
        self.debug_checks = debug_checks
        self.max_fill = 0  # high-water mark of per-segment operator count
        self.saturated_sweeps = 0
        self._alloc_buffers()

    def _alloc_buffers(self) -> None:
        st = self.state
        n_seg, M = st.op_cls.shape
        n_sites = st.data.n_sites
        n_legs = 4 * n_seg * M + 2 * n_seg * n_sites
        self._link = np.empty(n_legs, dtype=np.int32)
        self._parent = np.empty(n_legs, dtype=np.int32)
        self._size = np.empty(n_legs, dtype=np.int32)
        self._flip = np.empty(n_legs, dtype=np.int8)
        self._loop_id = np.empty(n_legs, dtype=np.int32)
        self._loop_parent = np.empty(n_legs // 2 + 1, dtype=np.int32)
        self._loop_flip = np.empty(n_legs // 2 + 1, dtype=np.int8)
        self._loop_size = np.empty(n_legs // 2 + 1, dtype=np.int32)
        self._order = np.empty(n_legs, dtype=np.int32)
        self._last_leg = np.empty(n_sites, dtype=np.int32)
        self._first_leg = np.empty(n_sites, dtype=np.int32)
        self._state_buf = np.empty(n_sites, dtype=np.int8)

    # -- moves --------------------------------------------------------------

    def diagonal_update(self) -> None:
        st = self.state
        kernels.diagonal_update(
            st.op_cls, st.op_loc, st.nops, st.jspins,
            st.data.bonds, st.data.bond_diag_aligned, st.data.bond_diag_anti,
            st.data.site_weight, st.data.has_site_ops, st.beta_segment,
            st.rng, self._state_buf,
        )

    def merge_split_update(self) -> None:
        st = self.state
        if st.flags.shape[0]:
            kernels.merge_split_update(st.flags, st.jspins, st.protocol.p, st.rng)

    def nonlocal_update(self) -> float:
        """Cluster (TFIM) or loop (CDHM) update; returns largest-cluster fraction."""
        st = self.state
        kernels.build_links(
            st.op_cls, st.op_loc, st.data.bonds, self._link, self._last_leg, self._first_leg
        )
        if st.data.kind == KIND_TFIM:
            return kernels.cluster_update_tfim(
                st.op_cls, st.op_loc, st.data.bonds, st.flags, st.jspins,
                self._link, self._parent, self._size, self._flip, st.rng,
            )
        frac, err = kernels.loop_update_cdhm(
            st.op_cls, st.op_loc, st.data.bonds, st.flags, st.jspins,
            self._link, self._loop_id, self._loop_parent, self._loop_flip,
            self._loop_size, self._order, st.rng,
        )
        if err:
            raise ConsistencyError(f"loop construction failed (code {err})")
        return frac

    def truncation_limit(self) -> int:
        return self.state.truncation

    def adjust_truncation(self) -> None:
        """Grow the shared string length when any segment runs above 3/4 full,
        inserting nulls at random positions (order-preserving embedding)."""
        st = self.state
        M = st.truncation
        target = max(grown_truncation(int(n), M) for n in st.nops)
        if target <= M:
            return
        n_seg = st.n_segments
        new_cls = np.full((n_seg, target), kernels.OP_NULL, dtype=np.int8)
        new_loc = np.zeros((n_seg, target), dtype=np.int32)
        for j in range(n_seg):
            keep = np.sort(st.rng.choice(target, size=M, replace=False))
            new_cls[j, keep] = st.op_cls[j]
            new_loc[j, keep] = st.op_loc[j]
        st.op_cls = new_cls
        st.op_loc = new_loc
        self._alloc_buffers()

    # -- sampling -----------------------------------------------------------

    def _measure_moments(self) -> tuple[float, float, float, float]:
        st = self.state
        if self.slice_mode == "trace":
            return kernels.slice_moments(st.jspins, st.data.signs, st.n_layers)
        a = np.array(kernels.slice_moments(st.jspins, st.data.signs, st.n_layers))
        b = np.array(kernels.slice_moments(st.jspins, st.data.signs, 0))
        out = (a + b) / 2.0
        return out[0], out[1], out[2], out[3]

    def sweep(self) -> tuple[float, float, float, float, float, int, float]:
        st = self.state
        self.diagonal_update()
        self.merge_split_update()
        frac = self.nonlocal_update()
        if self.debug_checks:
            st.check_worldlines()
        fill = int(st.nops.max())
        if fill > self.max_fill:
            self.max_fill = fill
        if fill >= self.truncation_limit():
            self.saturated_sweeps += 1
        st.sweep_count += 1
        m, am, m2, m4 = self._measure_moments()
        ff = float(st.flags.mean()) if st.flags.size else 0.0
        return m, am, m2, m4, ff, int(st.nops.sum()), frac

    def run(
        self,
        sweeps: int,
        equilibration: int = 0,
        track_flag_marginals: bool = False,
    ) -> SampleSeries:
        st = self.state
        for k in range(equilibration):
            self.sweep()
            self.adjust_truncation()
        self.max_fill = 0  # track saturation over the measurement phase only
        self.saturated_sweeps = 0
        out = np.empty((7, sweeps))
        flag_hist = None
        if track_flag_marginals:
            flag_hist = np.empty((sweeps, *st.flags.shape), dtype=np.uint8)
        for k in range(sweeps):
            rec = self.sweep()
            out[:, k] = rec
            if flag_hist is not None:
                flag_hist[k] = st.flags
        # a stray touch of the ceiling is statistically harmless; repeated
        # saturation means the truncation never grew to fit the ensemble
        if self.saturated_sweeps > max(2, sweeps // 1000):
            raise ConsistencyError(
                f"operator strings saturated (n = M = {self.truncation_limit()}) in "
                f"{self.saturated_sweeps}/{sweeps} sweeps; increase equilibration "
                "so the truncation can grow"
            )
        return SampleSeries(
            m_signed=out[0],
            m_abs=out[1],
            m2=out[2],
            m4=out[3],
            flag_frac=out[4],
            n_ops=out[5],
            cluster_frac=out[6],
            flag_history=flag_hist,
        )


def run_chain(
    model: ModelSpec,
    protocol: ProtocolParams,
    sweeps: int,
    equilibration: int,
    seed: int = 0,
    chain_index: int = 0,
    slice_mode: str = "trace",
    initial_truncation: int = 16,
    track_flag_marginals: bool = False,
    debug_checks: bool = False,
) -> SampleSeries:
    """One independent chain, deterministically keyed by (seed, chain_index)."""
    rng = chain_generator(seed, chain_index)
    sampler = SseSampler(
        model, protocol, rng,
        initial_truncation=initial_truncation,
        slice_mode=slice_mode,
        debug_checks=debug_checks,
    )
    return sampler.run(sweeps, equilibration, track_flag_marginals=track_flag_marginals)
