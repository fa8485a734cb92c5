"""Coherence of proximate nuclear spin qubits inside a donor's frozen core.

The package simulates Hahn-echo dephasing of a single ``29Si`` nuclear spin
sitting near a shallow donor (Si:P by default) in natural silicon.  Two bath
models are provided:

* a *far bath* of weakly flip-flopping nuclear spin pairs well outside the
  frozen core (huge pair count, tiny individual contributions), and
* an *equivalent pairs* bath of symmetry-degenerate pairs deep inside the
  frozen core, whose members share the same isotropic hyperfine coupling and
  therefore flip-flop freely despite the strong detuning around them.

Default units
-------------
- distance: Angstrom
- time: second
- magnetic field: Tesla
- couplings and frequencies: ordinary frequency (Hz); conversion from
  rad/s happens once, at the physical-constants boundary
- gyromagnetic ratios: rad s^-1 T^-1
"""

import logging

from .config import DonorConfig
from .pseudospin import (
    CoherenceCurve,
    PairCluster,
    PairKind,
    PseudospinParams,
    QubitKind,
    cce2_product,
    detunings,
    hahn_envelope,
    pseudospin_params,
)

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "DonorConfig",
    "CoherenceCurve",
    "PairCluster",
    "PairKind",
    "PseudospinParams",
    "QubitKind",
    "cce2_product",
    "detunings",
    "hahn_envelope",
    "pseudospin_params",
    "__version__",
]
