"""Numba kernels for the extended-ensemble SSE updates.

Leg numbering: operator vertex at (segment j, slot q) owns legs
``4*(j*M + q) + k`` with k = 0,1 below and k = 2,3 above (site operators
use k = 0 and 2).  Auxiliary identity vertices -- one per (junction,
site) -- own two legs starting at ``AUX_BASE = 4*n_seg*M``; their even
leg faces the segment below, odd leg the segment above.  The XOR-1
partner rule then covers both the deterministic Heisenberg loop moves
(switch horizontally at bond vertices) and pass-through at auxiliary
vertices.

Measured boundaries join structures across the ket/bra junction pair
(l, 2*n_d - l): clusters are unioned there, loops are flipped as one
group.  That is the whole extended-ensemble coupling; everything else is
the standard single-replica machinery.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OP_NULL = -1
OP_SITE_DIAG = 0
OP_SITE_OFF = 1
OP_BOND_DIAG = 2
OP_BOND_OFF = 3


@njit(cache=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, inline="always")
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra != rb:
        if ra < rb:
            parent[rb] = ra
        else:
            parent[ra] = rb


@njit(cache=True)
def diagonal_update(
    op_cls, op_loc, nops, jspins, bonds, bond_aligned, bond_anti,
    site_weight, has_sites, beta_seg, rng, state,
):
    """Sweep every segment string: insert/remove diagonal operators with the
    fixed-length SSE acceptance probabilities, propagating the spin state
    through off-diagonal operators."""
    n_seg, M = op_cls.shape
    n_sites = jspins.shape[1]
    n_bonds = bonds.shape[0]
    n_cand = n_bonds + (n_sites if has_sites else 0)
    for j in range(n_seg):
        for i in range(n_sites):
            state[i] = jspins[j, i]
        n = nops[j]
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_NULL:
                c = rng.integers(0, n_cand)
                if has_sites and c < n_sites:
                    if site_weight > 0.0:
                        prob = beta_seg * n_cand * site_weight / (M - n)
                        if prob >= 1.0 or rng.random() < prob:
                            op_cls[j, q] = OP_SITE_DIAG
                            op_loc[j, q] = c
                            n += 1
                else:
                    b = c - n_sites if has_sites else c
                    sa = bonds[b, 0]
                    sb = bonds[b, 1]
                    w = bond_aligned[b] if state[sa] == state[sb] else bond_anti[b]
                    if w > 0.0:
                        prob = beta_seg * n_cand * w / (M - n)
                        if prob >= 1.0 or rng.random() < prob:
                            op_cls[j, q] = OP_BOND_DIAG
                            op_loc[j, q] = b
                            n += 1
            elif cls == OP_SITE_DIAG:
                prob = (M - n + 1) / (beta_seg * n_cand * site_weight)
                if prob >= 1.0 or rng.random() < prob:
                    op_cls[j, q] = OP_NULL
                    n -= 1
            elif cls == OP_BOND_DIAG:
                b = op_loc[j, q]
                sa = bonds[b, 0]
                sb = bonds[b, 1]
                w = bond_aligned[b] if state[sa] == state[sb] else bond_anti[b]
                prob = (M - n + 1) / (beta_seg * n_cand * w)
                if prob >= 1.0 or rng.random() < prob:
                    op_cls[j, q] = OP_NULL
                    n -= 1
            elif cls == OP_SITE_OFF:
                s = op_loc[j, q]
                state[s] = -state[s]
            else:  # OP_BOND_OFF
                b = op_loc[j, q]
                state[bonds[b, 0]] = -state[bonds[b, 0]]
                state[bonds[b, 1]] = -state[bonds[b, 1]]
        nops[j] = n


@njit(cache=True)
def merge_split_update(flags, jspins, p, rng):
    """Toggle measured/unmeasured at every (site, boundary).

    Merging is proposed only when the ket and bra junction spins agree;
    acceptance min{p/(1-p), 1} for merge and min{(1-p)/p, 1} for split
    balances the p vs 1-p flag weights.

    Each junction is attempted lazily (probability 1/2).  Without the
    lazy coin the acceptances become deterministic at p = 1/2 and the
    sweep cycle conserves a flag parity on symmetric configurations,
    splitting the chain into classes and biasing flag statistics.
    """
    n_bound = flags.shape[0]
    n_sites = flags.shape[1]
    n_seg = jspins.shape[0]
    if p >= 1.0:
        p_merge, p_split = 1.0, 0.0
    elif p <= 0.0:
        p_merge, p_split = 0.0, 1.0
    else:
        p_merge = min(p / (1.0 - p), 1.0)
        p_split = min((1.0 - p) / p, 1.0)
    for l in range(1, n_bound + 1):
        jb = n_seg - l
        for i in range(n_sites):
            if rng.random() < 0.5:
                continue
            if flags[l - 1, i]:
                if p_split >= 1.0 or rng.random() < p_split:
                    flags[l - 1, i] = False
            else:
                if jspins[l, i] == jspins[jb, i]:
                    if p_merge >= 1.0 or (p_merge > 0.0 and rng.random() < p_merge):
                        flags[l - 1, i] = True


@njit(cache=True)
def build_links(op_cls, op_loc, bonds, link, last_leg, first_leg):
    """Doubly-linked worldline arcs around each site's circle, threading
    every auxiliary junction vertex and every non-null operator leg."""
    # stale entries at slots that became null are never read: every consumer
    # walks active legs only, all freshly linked here
    n_seg, M = op_cls.shape
    n_sites = last_leg.shape[0]
    aux_base = 4 * n_seg * M
    for i in range(n_sites):
        last_leg[i] = -1
        first_leg[i] = -1
    for j in range(n_seg):
        for i in range(n_sites):
            below = aux_base + 2 * (j * n_sites + i)
            if last_leg[i] >= 0:
                link[last_leg[i]] = below
                link[below] = last_leg[i]
            else:
                first_leg[i] = below
            last_leg[i] = below + 1
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_NULL:
                continue
            v = 4 * (j * M + q)
            if cls <= OP_SITE_OFF:
                s = op_loc[j, q]
                link[last_leg[s]] = v
                link[v] = last_leg[s]
                last_leg[s] = v + 2
            else:
                b = op_loc[j, q]
                sa = bonds[b, 0]
                sb = bonds[b, 1]
                link[last_leg[sa]] = v
                link[v] = last_leg[sa]
                link[last_leg[sb]] = v + 1
                link[v + 1] = last_leg[sb]
                last_leg[sa] = v + 2
                last_leg[sb] = v + 3
    for i in range(n_sites):
        link[last_leg[i]] = first_leg[i]
        link[first_leg[i]] = last_leg[i]


@njit(cache=True)
def cluster_update_tfim(
    op_cls, op_loc, bonds, flags, jspins, link, parent, size, flip, rng
):
    """Swendsen-Wang cluster decomposition for the Ising model with a field.

    Bond vertices glue all four legs into one cluster; site vertices
    terminate growth (their two legs may land in different clusters, and
    flipping exactly one side toggles the constant/spin-flip type).
    Auxiliary vertices pass growth through junctions; measured boundaries
    union the ket and bra junction clusters.  Every cluster flips with
    probability 1/2.  Returns the largest-cluster leg fraction.

    Only legs of non-null operators and auxiliary vertices are touched;
    padding slots never enter the union-find arrays.
    """
    n_seg, M = op_cls.shape
    n_sites = jspins.shape[1]
    n_d = n_seg // 2
    aux_base = 4 * n_seg * M
    n_aux = n_seg * n_sites
    # init + arc unions + vertex unions over active legs only
    total = 0
    for j in range(n_seg):
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_NULL:
                continue
            v = 4 * (j * M + q)
            if cls <= OP_SITE_OFF:
                parent[v] = v
                parent[v + 2] = v + 2
                size[v] = 0
                size[v + 2] = 0
                flip[v] = 0
                flip[v + 2] = 0
                total += 2
            else:
                for k in range(4):
                    parent[v + k] = v + k
                    size[v + k] = 0
                    flip[v + k] = 0
                total += 4
    for a in range(n_aux):
        v = aux_base + 2 * a
        parent[v] = v
        parent[v + 1] = v + 1
        size[v] = 0
        size[v + 1] = 0
        flip[v] = 0
        flip[v + 1] = 0
    total += 2 * n_aux
    # worldline arcs: union each arc once, from its lower-id endpoint
    for j in range(n_seg):
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_NULL:
                continue
            v = 4 * (j * M + q)
            if cls <= OP_SITE_OFF:
                if link[v] > v:
                    _union(parent, v, link[v])
                if link[v + 2] > v + 2:
                    _union(parent, v + 2, link[v + 2])
            else:
                for k in range(4):
                    if link[v + k] > v + k:
                        _union(parent, v + k, link[v + k])
                _union(parent, v, v + 1)
                _union(parent, v, v + 2)
                _union(parent, v, v + 3)
    for a in range(n_aux):
        v = aux_base + 2 * a
        if link[v] > v:
            _union(parent, v, link[v])
        if link[v + 1] > v + 1:
            _union(parent, v + 1, link[v + 1])
        _union(parent, v, v + 1)  # pass-through
    # measured pinches join ket and bra junction clusters
    for l in range(1, n_d):
        for i in range(n_sites):
            if flags[l - 1, i]:
                va = aux_base + 2 * (l * n_sites + i)
                vb = aux_base + 2 * ((n_seg - l) * n_sites + i)
                _union(parent, va, vb)
    # cluster sizes over active legs
    for j in range(n_seg):
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_NULL:
                continue
            v = 4 * (j * M + q)
            if cls <= OP_SITE_OFF:
                size[_find(parent, v)] += 1
                size[_find(parent, v + 2)] += 1
            else:
                size[_find(parent, v)] += 4
    for a in range(n_aux):
        size[_find(parent, aux_base + 2 * a)] += 2
    # flip decision per root, deterministic order: operator legs then aux legs
    largest = 0
    for j in range(n_seg):
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_NULL:
                continue
            v = 4 * (j * M + q)
            last = v + 2 if cls <= OP_SITE_OFF else v + 3
            step = 2 if cls <= OP_SITE_OFF else 1
            for u in range(v, last + 1, step):
                if size[u] > 0:
                    flip[u] = 1 if rng.random() < 0.5 else 2
                    if size[u] > largest:
                        largest = size[u]
    for a in range(2 * n_aux):
        u = aux_base + a
        if size[u] > 0:
            flip[u] = 1 if rng.random() < 0.5 else 2
            if size[u] > largest:
                largest = size[u]
    # apply: junction spins
    for j in range(n_seg):
        for i in range(n_sites):
            va = aux_base + 2 * (j * n_sites + i)
            if flip[_find(parent, va)] == 1:
                jspins[j, i] = -jspins[j, i]
    # apply: toggle site operators whose two sides flip differently
    for j in range(n_seg):
        for q in range(M):
            cls = op_cls[j, q]
            if cls == OP_SITE_DIAG or cls == OP_SITE_OFF:
                v = 4 * (j * M + q)
                lo = flip[_find(parent, v)] == 1
                hi = flip[_find(parent, v + 2)] == 1
                if lo != hi:
                    op_cls[j, q] = OP_SITE_OFF if cls == OP_SITE_DIAG else OP_SITE_DIAG
    return largest / total


@njit(cache=True)
def loop_update_cdhm(
    op_cls, op_loc, bonds, flags, jspins, link, loop_id, loop_parent, loop_flip,
    loop_size, order, rng,
):
    """Deterministic operator-loop update for the Heisenberg bond vertices.

    Loops follow the XOR-1 partner at every vertex (switch horizontally at
    bond operators, pass through auxiliary vertices) and the worldline
    links in between.  Measured boundaries union the two loops through the
    ket/bra junction pair so they flip as one.  Flipping toggles a bond
    vertex diagonal <-> off-diagonal whenever exactly one of its leg pairs
    flips.  Returns (largest loop-group leg fraction, error flag).
    """
    n_seg, M = op_cls.shape
    n_sites = jspins.shape[1]
    n_d = n_seg // 2
    aux_base = 4 * n_seg * M
    n_aux = n_seg * n_sites
    n_legs = aux_base + 2 * n_aux
    # reset loop ids of active legs only (bond-operator legs and aux legs)
    for j in range(n_seg):
        for q in range(M):
            if op_cls[j, q] != OP_NULL:
                v = 4 * (j * M + q)
                for k in range(4):
                    loop_id[v + k] = -1
    for a in range(2 * n_aux):
        loop_id[aux_base + a] = -1
    # deterministic traversal order: operator legs ascending, then aux legs
    n_active = 0
    for j in range(n_seg):
        for q in range(M):
            if op_cls[j, q] != OP_NULL:
                v = 4 * (j * M + q)
                for k in range(4):
                    order[n_active] = v + k
                    n_active += 1
    for a in range(2 * n_aux):
        order[n_active] = aux_base + a
        n_active += 1

    n_loops = 0
    total = 0
    for idx in range(n_active):
        v0 = order[idx]
        if loop_id[v0] >= 0:
            continue
        steps = 0
        v = v0
        count = 0
        failed = 0
        while True:
            loop_id[v] = n_loops
            w = v ^ 1
            if loop_id[w] >= 0:
                failed = 1  # bug trap: leg visited twice before closure
                break
            loop_id[w] = n_loops
            count += 2
            v = link[w]
            steps += 1
            if steps > n_legs:
                failed = 2  # bug trap: loop failed to close
                break
            if v == v0:
                break
            if loop_id[v] >= 0:
                failed = 1
                break
        if failed:
            return -1.0, failed
        loop_size[n_loops] = count
        total += count
        n_loops += 1
    # union loops across measured pinches
    for g in range(n_loops):
        loop_parent[g] = g
    for l in range(1, n_d):
        for i in range(n_sites):
            if flags[l - 1, i]:
                ga = loop_id[aux_base + 2 * (l * n_sites + i)]
                gb = loop_id[aux_base + 2 * ((n_seg - l) * n_sites + i)]
                _union(loop_parent, ga, gb)
    # group sizes and flip decisions
    largest = 0
    for g in range(n_loops):
        loop_flip[g] = 0
    for g in range(n_loops):
        r = _find(loop_parent, g)
        if r != g:
            loop_size[r] += loop_size[g]
            loop_size[g] = 0
    for g in range(n_loops):
        if loop_size[g] > 0:
            loop_flip[g] = 1 if rng.random() < 0.5 else 2
            if loop_size[g] > largest:
                largest = loop_size[g]
    # apply: junction spins
    for j in range(n_seg):
        for i in range(n_sites):
            g = loop_id[aux_base + 2 * (j * n_sites + i)]
            if loop_flip[_find(loop_parent, g)] == 1:
                jspins[j, i] = -jspins[j, i]
    # apply: toggle bond operators with exactly one flipped leg pair
    for j in range(n_seg):
        for q in range(M):
            cls = op_cls[j, q]
            if cls < OP_BOND_DIAG:
                continue
            v = 4 * (j * M + q)
            lo = loop_flip[_find(loop_parent, loop_id[v])] == 1
            hi = loop_flip[_find(loop_parent, loop_id[v + 2])] == 1
            if lo != hi:
                op_cls[j, q] = OP_BOND_OFF if cls == OP_BOND_DIAG else OP_BOND_DIAG
    frac = largest / total if total > 0 else 0.0
    return frac, 0


@njit(cache=True)
def slice_moments(jspins, signs, junction):
    """(m_signed, |m|, m^2, m^4) of the order-parameter density at one junction."""
    n_sites = jspins.shape[1]
    m = 0.0
    for i in range(n_sites):
        m += signs[i] * jspins[junction, i]
    m /= n_sites
    am = abs(m)
    return m, am, m * m, m * m * m * m
