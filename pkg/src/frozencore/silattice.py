"""Diamond-cubic silicon lattice, symmetry shells and random 29Si occupancy.

Sites are integer vectors n = [n1, n2, n3] in units of a0/4; Cartesian
positions are derived as (a0/4) * n, so symmetry classification never touches
floating point.  The eight-site basis of the conventional cell splits into
three classes by the mod-4 residue pattern of the coordinates:

    class 1: residues {0, 2, 2}   (three basis vectors)
    class 2: residues {0, 0, 0}   (one basis vector, contains the donor origin)
    class 3: residues {1, 1, 3} or {3, 3, 3}   (four basis vectors)

For a half-width of N conventional cells the per-class coordinate ranges are
chosen so that every symmetry shell present is *complete*:

    class 1: the 0-residue coordinate runs over 4m, m in [-N, N];
             the 2-residue coordinates over 4m+2, m in [-N, N-1]
             -> 4N^2(2N+1) sites per basis vector
    class 2: 4m, m in [-N, N] per coordinate -> (2N+1)^3 sites
    class 3: 4m+b, m in [-N, N-1] -> 8N^3 sites per basis vector

A shell is the set of sites sharing the sorted absolute-value triple
{|n1|, |n2|, |n3|}; on valid sites that is exactly one orbit of coordinate
permutations and sign flips that stay on the lattice (even sites admit all
48 signed permutations, odd sites only the 24 with an even number of sign
flips).  Shell sizes are therefore 48, 24, 12, 8, 6 or 4.

Occupancy is a pure function of (seed, site coordinates) through a 64-bit
integer hash, so realizations are reproducible independently of generation
order, chunking, and lattice extent.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

A0_DEFAULT = 5.43  # Angstrom

BASIS_CLASS1 = ((0, 2, 2), (2, 0, 2), (2, 2, 0))
BASIS_CLASS2 = ((0, 0, 0),)
BASIS_CLASS3 = ((3, 3, 3), (3, 1, 1), (1, 3, 1), (1, 1, 3))

_VALID_RESIDUE_MULTISETS = {(0, 0, 0), (0, 2, 2), (1, 1, 3), (3, 3, 3)}

_GEN_CHUNK = 2_000_000  # sites per generation block

# quantization step for the anisotropy sub-key (n_B . n)^2; axis-aligned
# fields give exact integers well inside this resolution
_ANISO_QUANTUM = 1e-9


class ShellKey(NamedTuple):
    """Canonical shell label: sorted |n| triple, plus the anisotropy sub-key
    (n_B . n)^2 when a field-direction filter is active."""

    triple: tuple
    aniso: Optional[float] = None


@dataclass(frozen=True)
class LatticeSite:
    """One lattice site; `n` in units of a0/4, `position` in Angstrom."""

    n: tuple
    basis_class: int
    position: tuple
    occupied: bool = False

    @property
    def radius(self) -> float:
        x, y, z = self.position
        return float(np.sqrt(x * x + y * y + z * z))


# ---------------------------------------------------------------------------
# coordinate hashing (occupancy + subsampling)
# ---------------------------------------------------------------------------

_SM64_1 = np.uint64(0x9E3779B97F4A7C15)
_SM64_2 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_3 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = (x + _SM64_1).astype(np.uint64)
        x = (x ^ (x >> np.uint64(30))) * _SM64_2
        x = (x ^ (x >> np.uint64(27))) * _SM64_3
        return x ^ (x >> np.uint64(31))


def coord_hash_u01(n: np.ndarray, salt: int) -> np.ndarray:
    """Uniform [0,1) value per site, a pure function of (salt, coordinates).

    Coordinates must satisfy |n_i| < 2^20 (half-widths up to ~260k cells).
    """
    n = np.asarray(n, dtype=np.int64)
    off = np.int64(1) << np.int64(20)
    packed = (((n[..., 0] + off) << np.int64(42))
              | ((n[..., 1] + off) << np.int64(21))
              | (n[..., 2] + off))
    salt_mix = _splitmix64(np.uint64(np.int64(salt) & np.int64(0x7FFFFFFFFFFFFFFF)))
    h = _splitmix64(packed.astype(np.uint64) ^ salt_mix)
    return h.astype(np.float64) / float(2**64)


OCCUPANCY_SALT = 0x0
SAMPLING_SALT = 0x5A5A5A5A


# ---------------------------------------------------------------------------
# site generation
# ---------------------------------------------------------------------------

def _class_value_arrays(extent: int):
    """Per-class, per-basis coordinate value arrays honouring the
    complete-shell ranges."""
    n = extent
    even_full = 4 * np.arange(-n, n + 1, dtype=np.int64)        # residue 0
    even_half = 4 * np.arange(-n, n, dtype=np.int64) + 2        # residue 2
    odd3 = 4 * np.arange(-n, n, dtype=np.int64) + 3
    odd1 = 4 * np.arange(-n, n, dtype=np.int64) + 1

    def vals(b):
        return {0: even_full, 2: even_half, 3: odd3, 1: odd1}[b]

    out = []
    for cls, bases in ((1, BASIS_CLASS1), (2, BASIS_CLASS2), (3, BASIS_CLASS3)):
        for basis in bases:
            out.append((cls, basis, tuple(vals(b) for b in basis)))
    return out


def _iter_coord_blocks(extent: int):
    """Yield (class_id, coords block) in a fixed canonical order."""
    for cls, _basis, (v1, v2, v3) in _class_value_arrays(extent):
        step = max(1, _GEN_CHUNK // max(1, len(v2) * len(v3)))
        for start in range(0, len(v1), step):
            sub = v1[start:start + step]
            g1, g2, g3 = np.meshgrid(sub, v2, v3, indexing="ij")
            block = np.stack(
                [g1.reshape(-1), g2.reshape(-1), g3.reshape(-1)], axis=1
            )
            yield cls, block


class SiteTable:
    """All sites for a given half-width, in canonical generation order."""

    def __init__(self, extent: int, a0: float = A0_DEFAULT):
        if extent < 1:
            raise ValueError(f"extent N={extent} must be >= 1")
        self.extent = int(extent)
        self.a0 = float(a0)
        blocks, classes = [], []
        for cls, block in _iter_coord_blocks(self.extent):
            blocks.append(block.astype(np.int32))
            classes.append(np.full(len(block), cls, dtype=np.uint8))
        self.n = np.concatenate(blocks)
        self.class_id = np.concatenate(classes)
        self._key_codes = None

    def __len__(self) -> int:
        return len(self.n)

    @property
    def positions(self) -> np.ndarray:
        return self.n.astype(np.float64) * (self.a0 / 4.0)

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    def key_codes(self) -> np.ndarray:
        """int64 encoding of the sorted |n| triple, for fast grouping."""
        if self._key_codes is None:
            self._key_codes = encode_keys(self.n)
        return self._key_codes

    def site(self, idx: int, occupied: bool = False) -> LatticeSite:
        n = tuple(int(c) for c in self.n[idx])
        pos = tuple(c * (self.a0 / 4.0) for c in n)
        return LatticeSite(n=n, basis_class=int(self.class_id[idx]),
                           position=pos, occupied=occupied)

    def __getitem__(self, idx: int) -> LatticeSite:
        return self.site(idx)

    def __iter__(self) -> Iterator[LatticeSite]:
        for i in range(len(self)):
            yield self.site(i)

    def class_site_counts(self) -> dict:
        return {c: int(np.count_nonzero(self.class_id == c)) for c in (1, 2, 3)}


@lru_cache(maxsize=4)
def _cached_table(extent: int, a0: float) -> SiteTable:
    return SiteTable(extent, a0)


def generate_sites(extent: int, a0: float = A0_DEFAULT) -> SiteTable:
    """All lattice sites of the three classes for half-width `extent` cells."""
    if extent < 1:
        raise ValueError(f"extent N={extent} must be >= 1")
    return _cached_table(int(extent), float(a0))


def encode_keys(n: np.ndarray) -> np.ndarray:
    """Encode sorted |n| triples into a single int64 per site."""
    a = np.sort(np.abs(np.asarray(n, dtype=np.int64)), axis=-1)
    return (a[..., 2] << np.int64(42)) | (a[..., 1] << np.int64(21)) | a[..., 0]


def decode_key(code: int) -> tuple:
    mask = (1 << 21) - 1
    return (int(code & mask), int((code >> 21) & mask), int(code >> 42))


# ---------------------------------------------------------------------------
# shell classification
# ---------------------------------------------------------------------------

def is_lattice_site(n: Sequence[int]) -> bool:
    """True when n lies on the diamond lattice (either sublattice)."""
    r = tuple(sorted(int(c) % 4 for c in n))
    return r in _VALID_RESIDUE_MULTISETS


def aniso_subkeys(n: np.ndarray, b_hat) -> np.ndarray:
    """Quantized (b_hat . n)^2 per site, int64.

    Axis-aligned field directions produce exact integer projections; the
    1e-9 quantization only matters for oblique directions, where distinct
    sub-shells are separated by far more than the quantum.
    """
    b = np.asarray(b_hat, dtype=float)
    b = b / np.linalg.norm(b)
    n = np.asarray(n, dtype=np.float64)
    proj = n @ b
    return np.round(proj * proj / _ANISO_QUANTUM).astype(np.int64)


def classify_shell(site, anisotropy_filter=None) -> ShellKey:
    """Canonical shell key of a site (optionally anisotropy-resolved).

    `site` may be a LatticeSite or a length-3 integer sequence;
    `anisotropy_filter` is the magnetic-field unit vector or None.
    """
    n = site.n if isinstance(site, LatticeSite) else tuple(int(c) for c in site)
    triple = tuple(sorted(abs(c) for c in n))
    if anisotropy_filter is None:
        return ShellKey(triple)
    sub = aniso_subkeys(np.asarray([n]), anisotropy_filter)[0]
    return ShellKey(triple, float(sub) * _ANISO_QUANTUM)


def orbit_sites(n: Sequence[int]) -> list:
    """All lattice sites reachable from n by signed coordinate permutations.

    Sign flips that change the sublattice parity pattern (odd sites under an
    odd number of flips) do not land on the lattice and are dropped.
    """
    n = tuple(int(c) for c in n)
    if not is_lattice_site(n):
        raise ValueError(f"{n} is not a lattice site")
    seen = set()
    for perm in permutations(n):
        for s1 in (1, -1):
            for s2 in (1, -1):
                for s3 in (1, -1):
                    cand = (s1 * perm[0], s2 * perm[1], s3 * perm[2])
                    if cand not in seen and is_lattice_site(cand):
                        seen.add(cand)
    return sorted(seen)


def shell_multiplicity(n: Sequence[int], anisotropy_filter=None) -> int:
    """Number of equivalent lattice sites in the (sub-)shell of n, including
    n itself, derived by explicit orbit enumeration."""
    members = orbit_sites(n)
    if anisotropy_filter is None:
        return len(members)
    arr = np.asarray(members, dtype=np.int64)
    subs = aniso_subkeys(arr, anisotropy_filter)
    ref = aniso_subkeys(np.asarray([n]), anisotropy_filter)[0]
    return int(np.count_nonzero(subs == ref))


def signed_permutation_count(triple: Sequence[int]) -> int:
    """Distinct signed permutations of a magnitude triple, ignoring lattice
    validity (the 48/24/12/8/6 case table); cross-check for
    `shell_multiplicity`."""
    a = sorted(abs(int(c)) for c in triple)
    perms = len(set(permutations(a)))
    signs = 2 ** sum(1 for c in a if c != 0)
    return perms * signs


# ---------------------------------------------------------------------------
# random occupancy
# ---------------------------------------------------------------------------

@dataclass
class BathRealization:
    """One random placement of 29Si impurities on the lattice.

    `n_occ` holds occupied-site coordinates only; the full site table is kept
    when the realization was generated from one (small extents) and dropped
    for large radius-limited generations.
    """

    n_occ: np.ndarray
    class_occ: np.ndarray
    extent: int
    p: float
    seed: int
    a0: float = A0_DEFAULT
    table: Optional[SiteTable] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.n_occ)

    @property
    def positions(self) -> np.ndarray:
        return self.n_occ.astype(np.float64) * (self.a0 / 4.0)

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    def site_at(self, idx: int) -> LatticeSite:
        n = tuple(int(c) for c in self.n_occ[idx])
        pos = tuple(c * (self.a0 / 4.0) for c in n)
        return LatticeSite(n=n, basis_class=int(self.class_occ[idx]),
                           position=pos, occupied=True)

    def sites(self) -> Iterator[LatticeSite]:
        for i in range(len(self)):
            yield self.site_at(i)

    def contains(self, n: Sequence[int]) -> bool:
        target = np.asarray(tuple(n), dtype=self.n_occ.dtype)
        if len(self.n_occ) == 0:
            return False
        return bool(np.any(np.all(self.n_occ == target, axis=1)))

    def index_of(self, n: Sequence[int]) -> int:
        target = np.asarray(tuple(n), dtype=self.n_occ.dtype)
        hits = np.flatnonzero(np.all(self.n_occ == target, axis=1))
        if len(hits) == 0:
            raise KeyError(f"site {tuple(n)} not occupied")
        return int(hits[0])

    def ensure_occupied(self, site: "LatticeSite") -> None:
        """Force one site to be occupied (the probed spin is a 29Si by
        definition).  No-op when it already is."""
        if self.contains(site.n):
            return
        self.n_occ = np.vstack([self.n_occ,
                                np.asarray(site.n, dtype=self.n_occ.dtype)])
        self.class_occ = np.append(self.class_occ,
                                   np.uint8(site.basis_class))
        self._cache.clear()

    def iso_codes(self) -> np.ndarray:
        if "iso" not in self._cache:
            self._cache["iso"] = encode_keys(self.n_occ)
        return self._cache["iso"]

    def sub_codes(self, b_hat) -> np.ndarray:
        key = ("sub", tuple(np.round(np.asarray(b_hat, float), 12)))
        if key not in self._cache:
            self._cache[key] = aniso_subkeys(self.n_occ, b_hat)
        return self._cache[key]


def _occupied_mask(coords: np.ndarray, p: float, seed: int) -> np.ndarray:
    u = coord_hash_u01(coords, seed ^ OCCUPANCY_SALT)
    mask = u < p
    # the donor sits at the origin; it is never a bath spin
    mask &= np.any(coords != 0, axis=1)
    return mask


def populate(extent: int, p: float, seed: int, a0: float = A0_DEFAULT) -> BathRealization:
    """Independent Bernoulli(p) occupancy over the full site table.

    Deterministic: occupancy of a site depends only on (seed, coordinates),
    so realizations at different extents agree on their overlap.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"abundance p={p} outside [0, 1]")
    table = generate_sites(extent, a0)
    mask = _occupied_mask(table.n.astype(np.int64), p, seed)
    idx = np.flatnonzero(mask)
    return BathRealization(
        n_occ=table.n[idx].copy(),
        class_occ=table.class_id[idx].copy(),
        extent=int(extent), p=float(p), seed=int(seed), a0=float(a0),
        table=table,
    )


def occupied_in_ball(r_max: float, p: float, seed: int, a0: float = A0_DEFAULT,
                     r_min: float = 0.0) -> BathRealization:
    """Occupied sites with radius in [r_min, r_max], generated chunk-wise so
    the full site table for large extents is never materialized.

    Shares the coordinate-hash occupancy with `populate`: for equal seeds the
    result is exactly the radius-restricted subset of any cube realization.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"abundance p={p} outside [0, 1]")
    extent = int(np.ceil(r_max / a0))
    scale = a0 / 4.0
    keep_n, keep_c = [], []
    for cls, block in _iter_coord_blocks(extent):
        mask = _occupied_mask(block, p, seed)
        if not mask.any():
            continue
        sub = block[mask]
        r2 = (sub.astype(np.float64) ** 2).sum(axis=1) * scale * scale
        sel = (r2 >= r_min * r_min) & (r2 <= r_max * r_max)
        if sel.any():
            keep_n.append(sub[sel].astype(np.int32))
            keep_c.append(np.full(int(sel.sum()), cls, dtype=np.uint8))
    if keep_n:
        n_occ = np.concatenate(keep_n)
        class_occ = np.concatenate(keep_c)
    else:
        n_occ = np.empty((0, 3), dtype=np.int32)
        class_occ = np.empty(0, dtype=np.uint8)
    return BathRealization(n_occ=n_occ, class_occ=class_occ, extent=extent,
                           p=float(p), seed=int(seed), a0=float(a0))


def equivalent_sites(site, realization: BathRealization,
                     anisotropy_filter=None) -> list:
    """Occupied sites sharing the (sub-)shell key of `site`, excluding it.

    Symmetric by construction: b in eq(a) iff a in eq(b).
    """
    n = site.n if isinstance(site, LatticeSite) else tuple(int(c) for c in site)
    if len(realization) == 0:
        return []
    probe = np.asarray([n], dtype=np.int64)
    match = realization.iso_codes() == encode_keys(probe)[0]
    if anisotropy_filter is not None:
        ref = aniso_subkeys(probe, anisotropy_filter)[0]
        match &= realization.sub_codes(anisotropy_filter) == ref
    return [realization.site_at(int(i)) for i in np.flatnonzero(match)
            if tuple(int(c) for c in realization.n_occ[i]) != n]


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def lattice_to_csv(realization: BathRealization, path) -> None:
    """Dump a realization as CSV with the metadata in '#' header lines."""
    table = realization.table
    with open(path, "w") as fh:
        fh.write(f"# seed = {realization.seed}\n")
        fh.write(f"# p = {realization.p!r}\n")
        fh.write(f"# extent_cells = {realization.extent}\n")
        fh.write("n1,n2,n3,class,x,y,z,occupied\n")
        if table is not None:
            occ = set(map(tuple, realization.n_occ.tolist()))
            for i in range(len(table)):
                n = tuple(int(c) for c in table.n[i])
                x, y, z = (c * (table.a0 / 4.0) for c in n)
                fh.write(f"{n[0]},{n[1]},{n[2]},{int(table.class_id[i])},"
                         f"{x:.6f},{y:.6f},{z:.6f},{int(n in occ)}\n")
        else:
            for i in range(len(realization)):
                n = tuple(int(c) for c in realization.n_occ[i])
                x, y, z = (c * (realization.a0 / 4.0) for c in n)
                fh.write(f"{n[0]},{n[1]},{n[2]},{int(realization.class_occ[i])},"
                         f"{x:.6f},{y:.6f},{z:.6f},1\n")
