"""Closed-form combinatorics of equivalent lattice sites.

Shell counts, binomial pair expectations, equivalent-pair totals and density
profiles, all as exact-rational evaluations of the counting formulas, with a
brute-force lattice enumeration as the in-module oracle.

For half-width N (conventional cells) the number of complete shells holding
n_s equivalent partners is

    N_12(N) = 4 N^2
    N_24(N) = (4/3) N (N^2 - 1) + N^2
    N_48(N) = (2/3) N^3 - N^2 + N/3
    N_8(N)  = N_6(N) = N,      N_4(N) = 2 N

and the per-class member contributions (sites per class that belong to
shells of a given multiplicity) are

    class 1:  n_s=48: 24 N^2 (N-1)      n_s=24: 12 N (3N-1)        n_s=12: 12 N
    class 2:  n_s=48: 8 N (N-1)(N-2)    n_s=24: 36 N (N-1)         n_s=12: 12 N
              n_s=8: 8 N                n_s=6: 6 N
    class 3:  n_s=24: 16 N (N-1)(2N-1)  n_s=12: 24 N (2N-1)        n_s=4: 8 N

With site occupancy a Bernoulli(p) per site, the expected number of occupied
pairs inside one shell of n_s sites is C(n_s, 2) p^2, and the expected total
number of equivalent pairs within N cells follows by summing over shells.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import silattice

MULTIPLICITIES = (48, 24, 12, 8, 6, 4)


@dataclass
class ShellCensus:
    """Shell counts per multiplicity and per-class member contributions."""

    extent: int
    shells: dict                      # n_s -> number of complete shells
    members_by_class: dict            # (class, n_s) -> number of sites
    source: str = "closed_form"

    def members(self, ns: int) -> int:
        return sum(v for (c, m), v in self.members_by_class.items() if m == ns)

    def total_sites(self) -> int:
        """All shell members plus the donor origin."""
        return sum(ns * cnt for ns, cnt in self.shells.items()) + 1


def _as_int(x: Fraction) -> int:
    if x.denominator != 1:
        raise ArithmeticError(f"shell-count formula gave non-integer {x}")
    return int(x)


def shell_counts_closed_form(extent: int) -> ShellCensus:
    """Evaluate the shell-count formulas exactly (rational arithmetic)."""
    if extent < 1:
        raise ValueError(f"extent N={extent} must be >= 1")
    n = Fraction(extent)
    shells = {
        48: _as_int(Fraction(2, 3) * n**3 - n**2 + n / 3),
        24: _as_int(Fraction(4, 3) * n * (n**2 - 1) + n**2),
        12: _as_int(4 * n**2),
        8: _as_int(n),
        6: _as_int(n),
        4: _as_int(2 * n),
    }
    m = extent
    members_by_class = {
        (1, 48): 24 * m**2 * (m - 1),
        (1, 24): 12 * m * (3 * m - 1),
        (1, 12): 12 * m,
        (2, 48): 8 * m * (m - 1) * (m - 2),
        (2, 24): 36 * m * (m - 1),
        (2, 12): 12 * m,
        (2, 8): 8 * m,
        (2, 6): 6 * m,
        (3, 24): 16 * m * (m - 1) * (2 * m - 1),
        (3, 12): 24 * m * (2 * m - 1),
        (3, 4): 8 * m,
    }
    return ShellCensus(extent=extent, shells=shells,
                       members_by_class=members_by_class, source="closed_form")


def shell_counts_enumerated(extent: int) -> ShellCensus:
    """Brute-force orbit enumeration over the generated lattice.

    Serves as the oracle for the closed forms; intended for desk-scale
    extents (N <= 25 or so).
    """
    if extent > 25:
        raise ValueError("enumeration oracle is desk-scale only (N <= 25)")
    table = silattice.generate_sites(extent)
    codes = table.key_codes()
    uniq, inverse, counts = np.unique(codes, return_inverse=True,
                                      return_counts=True)
    origin = silattice.encode_keys(np.zeros((1, 3), dtype=np.int64))[0]
    shells = {ns: 0 for ns in MULTIPLICITIES}
    members_by_class = {}
    site_class = table.class_id
    for k, code in enumerate(uniq):
        if code == origin:
            continue
        ns = int(counts[k])
        if ns not in shells:
            raise AssertionError(f"unexpected shell multiplicity {ns} "
                                 f"for key {silattice.decode_key(int(code))}")
        shells[ns] += 1
    # member counts per (class, multiplicity)
    ns_of_site = counts[inverse]
    keep = codes != origin
    for cls in (1, 2, 3):
        cls_mask = keep & (site_class == cls)
        for ns in MULTIPLICITIES:
            cnt = int(np.count_nonzero(cls_mask & (ns_of_site == ns)))
            if cnt:
                members_by_class[(cls, ns)] = cnt
    return ShellCensus(extent=extent, shells=shells,
                       members_by_class=members_by_class, source="enumerated")


# ---------------------------------------------------------------------------
# binomial pair expectations
# ---------------------------------------------------------------------------

def pair_expectation_sum(ns: int, p: float) -> float:
    """E[k(k-1)/2] for k ~ Binomial(ns, p), by explicit summation."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"abundance p={p} outside [0, 1]")
    total = 0.0
    for k in range(2, ns + 1):
        total += (math.comb(ns, k) * p**k * (1.0 - p) ** (ns - k)
                  * k * (k - 1) / 2.0)
    return total


def expected_pairs_per_shell(ns: int, p: float) -> float:
    """Mean number of occupied pairs in a shell of ns sites: C(ns,2) p^2.

    The explicit binomial sum and the closed form are both evaluated and
    cross-checked on every call.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"abundance p={p} outside [0, 1]")
    closed = math.comb(ns, 2) * p * p
    summed = pair_expectation_sum(ns, p)
    if abs(summed - closed) > 1e-12 * max(1.0, closed):
        raise AssertionError(
            f"binomial pair expectation mismatch for ns={ns}, p={p}: "
            f"sum={summed!r} closed={closed!r}")
    return closed


def total_ep_count(extent: int, p: float) -> float:
    """Expected number of equivalent pairs within `extent` cells."""
    census = shell_counts_closed_form(extent)
    return sum(expected_pairs_per_shell(ns, p) * census.shells[ns]
               for ns in MULTIPLICITIES)


def cells_for_radius(radius_angstrom: float, a0: float = silattice.A0_DEFAULT) -> int:
    """Nearest whole-cell half-width for a target radius."""
    return max(1, int(round(radius_angstrom / a0)))


def observed_ep_count(realization) -> int:
    """Occupied equivalent pairs actually present in a realization
    (sum over shells of C(k_occupied, 2)); Monte-Carlo counterpart of
    `total_ep_count`."""
    if len(realization) == 0:
        return 0
    codes = realization.iso_codes()
    origin = silattice.encode_keys(np.zeros((1, 3), dtype=np.int64))[0]
    _, counts = np.unique(codes[codes != origin], return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


# ---------------------------------------------------------------------------
# density profile
# ---------------------------------------------------------------------------

ISOTROPIC = "isotropic"
FILTERED = "anisotropy_filtered"

# under a [100]-type field filter the large shells split threefold
_FILTER_SPLIT = {48: (16, 3), 24: (8, 3), 12: (4, 3)}


@dataclass
class DensityRow:
    extent: int
    radius: float                     # N * a0, Angstrom
    per_ns: dict = field(default_factory=dict)
    total: float = 0.0


def ep_density_profile(extent_max: int, p: float, mode: str = ISOTROPIC,
                       a0: float = silattice.A0_DEFAULT) -> list:
    """Mean equivalent pairs per conventional cell vs distance.

    D(n_s, N) = zeta(n_s) * N_shells(n_s, N) / (2N)^3.  In the
    anisotropy-filtered mode the n_s = 48, 24, 12 shells are split into
    three sub-shells of a third the multiplicity each.
    """
    if extent_max < 2:
        raise ValueError("extent_max must be >= 2")
    if mode not in (ISOTROPIC, FILTERED):
        raise ValueError(f"unknown density mode {mode!r}")
    rows = []
    for n in range(1, extent_max + 1):
        census = shell_counts_closed_form(n)
        cells = (2 * n) ** 3
        row = DensityRow(extent=n, radius=n * a0)
        for ns in MULTIPLICITIES:
            count = census.shells[ns]
            eff_ns = ns
            if mode == FILTERED and ns in _FILTER_SPLIT:
                eff_ns, factor = _FILTER_SPLIT[ns]
                count *= factor
            row.per_ns[ns] = expected_pairs_per_shell(eff_ns, p) * count / cells
        row.total = sum(row.per_ns.values())
        rows.append(row)
    return rows
