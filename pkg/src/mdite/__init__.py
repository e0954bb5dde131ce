"""Measurement-dressed imaginary-time evolution (MDITE) toolkit.

Alternating imaginary-time propagation and probabilistic Z-basis
measurements on a mixed state, simulated two ways:

* ``mdite.oracle`` -- exact density-matrix channel iteration for small
  systems (the ground truth used by every Monte Carlo test), and
* ``mdite.sse`` -- an extended-ensemble stochastic series expansion
  sampler of the generalized partition function for large systems,

plus ``mdite.estimators`` (binning / jackknife / autocorrelation),
``mdite.analysis`` (Binder crossings, data collapse, critical surfaces)
and a ``mdite`` command-line pipeline.
"""

from .models import (
    LatticeSpec,
    ModelSpec,
    OperatorTable,
    ProtocolParams,
    build_chain_lattice,
    build_columnar_lattice,
    magnetization,
    operator_table,
)

__all__ = [
    "LatticeSpec",
    "ModelSpec",
    "ProtocolParams",
    "OperatorTable",
    "build_chain_lattice",
    "build_columnar_lattice",
    "operator_table",
    "magnetization",
]

__version__ = "0.1.0"
