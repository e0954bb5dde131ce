"""Lattices, Hamiltonian specifications and local operator tables.

Both the dense oracle and the SSE engine are driven from the same
:class:`ModelSpec`: a lattice (site count, bond list with per-bond
couplings, integer coordinates) plus the model kind and its parameters.

Two models are supported:

* ``tfim``  -- ferromagnetic transverse-field Ising chain/graph,
  ``H = -J sum_<ij> Z_i Z_j - h sum_i X_i``.
* ``cdhm``  -- antiferromagnetic columnar dimerized Heisenberg model,
  ``H = sum_<ij> J_b  S_i . S_j`` with ``J_b in {1, g}``.

The operator tables hold the strictly positive matrix elements the SSE
sampler needs (site/bond, diagonal/off-diagonal), with the constant
offsets chosen so every allowed vertex has positive weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TFIM = "tfim"
CDHM = "cdhm"


class InvalidSizeError(ValueError):
    """Lattice size incompatible with the requested geometry."""


class UnsupportedModelError(ValueError):
    """Model parameters outside the sign-problem-free regime."""


@dataclass(frozen=True)
class LatticeSpec:
    """Immutable lattice: sites, bonds with couplings, coordinates.

    ``bonds[k] = (site_a, site_b)`` and ``bond_class[k]`` is 0 for
    unit-strength bonds, 1 for g-strength bonds, 2 for a collapsed
    unit+g pair (only possible on degenerate size-2 tiles).
    ``bond_scale[k]`` carries the degeneracy factor of collapsed doubled
    bonds (PBC with linear size 2), so the effective coupling of bond k
    is ``bond_scale[k] * {1, g, 1+g}[bond_class[k]]``.
    """

    n_sites: int
    bonds: tuple[tuple[int, int], ...]
    bond_class: tuple[int, ...]
    bond_scale: tuple[float, ...]
    coords: tuple[tuple[int, int], ...]
    geometry_tag: str

    def __post_init__(self) -> None:
        if len(self.bonds) != len(self.bond_class) or len(self.bonds) != len(self.bond_scale):
            raise ValueError("bond arrays must have equal length")
        seen = set()
        for a, b in self.bonds:
            if not (0 <= a < self.n_sites and 0 <= b < self.n_sites):
                raise ValueError(f"bond ({a},{b}) references invalid site")
            if a == b:
                raise ValueError(f"self-bond at site {a}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate bond {key}; collapse doubled bonds instead")
            seen.add(key)
        if self.coords and len(self.coords) != self.n_sites:
            raise ValueError("coords must cover every site")

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def bond_array(self) -> np.ndarray:
        """Bonds as an (n_bonds, 2) int array, stable enumeration order."""
        return np.asarray(self.bonds, dtype=np.int64)

    def stagger_signs(self) -> np.ndarray:
        """(-1)**(x+y) per site, for staggered observables."""
        if not self.coords:
            raise ValueError("lattice has no coordinates; staggering undefined")
        xy = np.asarray(self.coords, dtype=np.int64)
        return np.where((xy[:, 0] + xy[:, 1]) % 2 == 0, 1, -1).astype(np.int64)


@dataclass(frozen=True)
class ModelSpec:
    """Hamiltonian choice on a lattice.

    ``h`` is the transverse field (TFIM only), ``g`` the dimer coupling
    (CDHM only, applied to bonds of class 1), ``J`` the Ising scale.
    """

    kind: str
    lattice: LatticeSpec
    h: float = 0.0
    g: float = 1.0
    J: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (TFIM, CDHM):
            raise UnsupportedModelError(f"unknown model kind {self.kind!r}")
        if self.h < 0 or self.g < 0 or self.J <= 0:
            raise UnsupportedModelError(
                "need h >= 0, g >= 0, J > 0 (negative couplings are not sign-free here)"
            )

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def bond_couplings(self) -> np.ndarray:
        """Effective coupling J_b per bond (class and collapse scale applied)."""
        cls = np.asarray(self.lattice.bond_class, dtype=np.int64)
        scale = np.asarray(self.lattice.bond_scale, dtype=np.float64)
        if self.kind == TFIM:
            base = np.full(cls.shape, self.J, dtype=np.float64)
        else:
            strength = np.array([1.0, self.g, 1.0 + self.g])
            base = strength[cls]
        return base * scale

    def control_value(self) -> float:
        """The Hamiltonian knob that scans vary: h for TFIM, g for CDHM."""
        return self.h if self.kind == TFIM else self.g


@dataclass(frozen=True)
class ProtocolParams:
    """Per-layer time step tau, measurement rate p, circuit depth n_layers."""

    tau: float
    p: float
    n_layers: int

    def __post_init__(self) -> None:
        if not self.tau >= 0:
            raise ValueError("tau must be nonnegative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.n_layers < 1:
            raise ValueError("need at least one layer")


def auto_depth(L: int, tau: float) -> int:
    """Default circuit depth round(2*L/tau), the stationarity rule of thumb."""
    return max(1, round(2 * L / tau))


# ---------------------------------------------------------------------------
# Lattice builders
# ---------------------------------------------------------------------------

def _collapse_doubled(
    raw: list[tuple[int, int, int]],
) -> tuple[list[tuple[int, int]], list[int], list[float]]:
    """Merge duplicate (a,b) pairs into single bonds of summed coupling.

    Only PBC wrap at linear size 2 produces duplicates.  Same-class pairs
    become one bond with bond_scale 2; a unit+g pair becomes a class-2
    bond with effective coupling 1+g.
    """
    counts: dict[tuple[int, int], list[int]] = {}
    order: list[tuple[int, int]] = []
    for a, b, cls in raw:
        key = (min(a, b), max(a, b))
        if key not in counts:
            counts[key] = [0, 0]
            order.append(key)
        counts[key][cls] += 1
    bonds, classes, scales = [], [], []
    for key in order:
        unit, gcnt = counts[key]
        bonds.append(key)
        if gcnt == 0:
            classes.append(0)
            scales.append(float(unit))
        elif unit == 0:
            classes.append(1)
            scales.append(float(gcnt))
        else:
            if unit != gcnt:
                raise InvalidSizeError(f"bond {key} collapses with uneven unit/g multiplicity")
            classes.append(2)
            scales.append(float(unit))
    return bonds, classes, scales


def build_chain_lattice(L: int) -> LatticeSpec:
    """Periodic chain of L sites; site L-1 wraps to site 0."""
    if L < 2:
        raise InvalidSizeError(f"chain needs L >= 2, got {L}")
    raw = [(i, (i + 1) % L, 0) for i in range(L)]
    bonds, classes, scales = _collapse_doubled(raw)
    coords = tuple((i, 0) for i in range(L))
    return LatticeSpec(
        n_sites=L,
        bonds=tuple(bonds),
        bond_class=tuple(classes),
        bond_scale=tuple(scales),
        coords=coords,
        geometry_tag="chain-PBC",
    )


def build_columnar_lattice(L: int) -> LatticeSpec:
    """L x L periodic square lattice with columnar dimerization.

    Horizontal bonds starting at even x carry the g coupling (class 1);
    all other bonds are unit strength.  L must be even so the dimer
    pattern tiles.
    """
    if L < 2 or L % 2 != 0:
        raise InvalidSizeError(f"columnar lattice needs even L >= 2, got {L}")
    return build_columnar_rect(L, L)


def build_columnar_rect(Lx: int, Ly: int) -> LatticeSpec:
    """Rectangular Lx x Ly columnar-dimerized lattice, PBC both ways.

    The dimer pattern runs along x, so Lx must be even.  Doubled bonds
    at linear size 2 collapse to a single bond of twice the coupling.
    """
    if Lx < 2 or Ly < 2 or Lx % 2 != 0:
        raise InvalidSizeError(f"columnar tile needs even Lx >= 2 and Ly >= 2, got {Lx}x{Ly}")

    def site(x: int, y: int) -> int:
        return (y % Ly) * Lx + (x % Lx)

    raw: list[tuple[int, int, int]] = []
    for y in range(Ly):
        for x in range(Lx):
            cls = 1 if x % 2 == 0 else 0
            raw.append((site(x, y), site(x + 1, y), cls))
    for y in range(Ly):
        for x in range(Lx):
            raw.append((site(x, y), site(x, y + 1), 0))
    bonds, classes, scales = _collapse_doubled(raw)
    coords = tuple((i % Lx, i // Lx) for i in range(Lx * Ly))
    tag = "square-columnar-PBC" if Lx == Ly else "explicit"
    return LatticeSpec(
        n_sites=Lx * Ly,
        bonds=tuple(bonds),
        bond_class=tuple(classes),
        bond_scale=tuple(scales),
        coords=coords,
        geometry_tag=tag,
    )


# ---------------------------------------------------------------------------
# Operator tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorTable:
    """Positive SSE matrix elements per operator class.

    ``site_diag``/``site_off`` are the constant and spin-flip site
    elements (TFIM: both h; CDHM: site operators absent, 0).  Bond
    elements are per-bond arrays keyed by the local two-spin state:
    ``bond_aligned[b]`` for parallel spins, ``bond_anti[b]`` for
    antiparallel, ``bond_exchange[b]`` for the off-diagonal flip-flop.
    """

    kind: str
    site_diag: float
    site_off: float
    bond_aligned: np.ndarray = field(repr=False)
    bond_anti: np.ndarray = field(repr=False)
    bond_exchange: np.ndarray = field(repr=False)

    @property
    def has_site_ops(self) -> bool:
        return self.site_diag > 0 or self.site_off > 0

    def max_diag_element(self, bond: int, aligned: bool) -> float:
        return float(self.bond_aligned[bond] if aligned else self.bond_anti[bond])


def operator_table(model: ModelSpec) -> OperatorTable:
    """Build the positive-element table driving diagonal updates and weights.

    TFIM (per appendix conventions): site H0 = h*I and H1 = h*X both have
    element h; the bond operator J_b(Z_i Z_j + I) has element 2*J_b on
    aligned pairs and 0 on anti-aligned pairs.

    CDHM: bond operator J_b*(1/4 - S_i.S_j) after the bipartite sublattice
    rotation; element J_b/2 on anti-aligned pairs (diagonal) and J_b/2 for
    the exchange flip (off-diagonal), 0 on aligned pairs.
    """
    Jb = model.bond_couplings()
    if model.kind == TFIM:
        return OperatorTable(
            kind=TFIM,
            site_diag=model.h,
            site_off=model.h,
            bond_aligned=2.0 * Jb,
            bond_anti=np.zeros_like(Jb),
            bond_exchange=np.zeros_like(Jb),
        )
    return OperatorTable(
        kind=CDHM,
        site_diag=0.0,
        site_off=0.0,
        bond_aligned=np.zeros_like(Jb),
        bond_anti=0.5 * Jb,
        bond_exchange=0.5 * Jb,
    )


def magnetization(spins: np.ndarray, model: ModelSpec) -> float:
    """Order parameter of a classical spin state: sum of Z values.

    TFIM: plain sum of +-1 spins.  CDHM: staggered sum with signs
    (-1)**(x_i + y_i).  Extensive (not divided by N).
    """
    s = np.asarray(spins)
    if s.shape != (model.n_sites,):
        raise ValueError(f"expected {model.n_sites} spins, got shape {s.shape}")
    if model.kind == TFIM:
        return float(np.sum(s))
    return float(np.sum(model.lattice.stagger_signs() * s))
