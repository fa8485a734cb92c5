import numpy as np
import pytest

from frozencore import silattice
from frozencore.silattice import (
    BathRealization,
    classify_shell,
    encode_keys,
    equivalent_sites,
    generate_sites,
    is_lattice_site,
    occupied_in_ball,
    orbit_sites,
    populate,
    shell_multiplicity,
    signed_permutation_count,
)


def test_generate_sites_rejects_bad_extent():
    with pytest.raises(ValueError):
        generate_sites(0)
    with pytest.raises(ValueError):
        generate_sites(-2)


@pytest.mark.parametrize("extent", [1, 2, 3, 4])
def test_per_class_site_counts(extent):
    table = generate_sites(extent)
    counts = table.class_site_counts()
    n = extent
    assert counts[1] == 3 * 4 * n**2 * (2 * n + 1)
    assert counts[2] == (2 * n + 1) ** 3
    assert counts[3] == 4 * 8 * n**3


def test_total_count_approaches_64_n_cubed():
    ratios = []
    for n in (4, 10, 16):
        total = len(generate_sites(n))
        assert total == 64 * n**3 + 24 * n**2 + 6 * n + 1
        ratios.append(total / (64.0 * n**3))
    assert ratios == sorted(ratios, reverse=True)
    assert ratios[-1] < 1.03
    assert all(r > 1.0 for r in ratios)


def test_positions_exact_quarter_lattice():
    table = generate_sites(2)
    assert np.array_equal(table.positions,
                          table.n.astype(float) * (table.a0 / 4.0))


def test_residue_classes_match_basis():
    table = generate_sites(2)
    res = np.sort(np.mod(table.n, 4), axis=1)
    for cls, expect in ((1, (0, 2, 2)), (2, (0, 0, 0))):
        rows = res[table.class_id == cls]
        assert np.all(rows == np.asarray(expect))
    odd = res[table.class_id == 3]
    patterns = {tuple(r) for r in odd}
    assert patterns == {(1, 1, 3), (3, 3, 3)}


def test_is_lattice_site():
    assert is_lattice_site((0, 2, 2))
    assert is_lattice_site((3, 1, 1))
    assert is_lattice_site((-5, -5, -5))   # -5 = 3 mod 4
    assert not is_lattice_site((1, 2, 3))  # mixed parity
    assert not is_lattice_site((1, 3, 3))  # even number of 3-residues
    assert not is_lattice_site((2, 2, 2))


# -- shell classification ----------------------------------------------------

def test_shell_key_is_sorted_abs_triple():
    key = classify_shell((-6, 2, -4))
    assert key.triple == (2, 4, 6)
    assert key.aniso is None


def test_shell_key_equality_implies_equal_radius_and_converse_fails():
    table = generate_sites(4)
    codes = encode_keys(table.n)
    r2 = (table.n.astype(np.int64) ** 2).sum(axis=1)
    by_code = {}
    for code, rr in zip(codes.tolist(), r2.tolist()):
        by_code.setdefault(code, set()).add(rr)
    # same key -> same radius, exhaustively
    assert all(len(v) == 1 for v in by_code.values())
    # converse fails: distinct keys sharing a radius exist ({1,1,5} vs {3,3,3})
    radii = {}
    for code, v in by_code.items():
        radii.setdefault(next(iter(v)), set()).add(code)
    assert any(len(codes_) > 1 for codes_ in radii.values())


def test_multiplicity_by_orbit_enumeration():
    assert shell_multiplicity((2, 4, 6)) == 48      # even, distinct
    assert shell_multiplicity((2, 2, 4)) == 24      # even, repeated
    assert shell_multiplicity((0, 2, 2)) == 12
    assert shell_multiplicity((0, 0, 4)) == 6
    assert shell_multiplicity((4, 4, 4)) == 8
    assert shell_multiplicity((1, 3, 5)) == 24      # odd sites: half-orbits
    assert shell_multiplicity((1, 1, 3)) == 12
    assert shell_multiplicity((3, 3, 3)) == 4


def test_multiplicity_case_table_cross_check():
    # on even sites the full signed-permutation count is realized; on odd
    # sites exactly half survives the sublattice parity constraint
    for n in [(2, 4, 6), (2, 2, 4), (0, 2, 2), (0, 0, 4), (4, 4, 4)]:
        assert shell_multiplicity(n) == signed_permutation_count(n)
    for n in [(1, 3, 5), (1, 1, 3), (3, 3, 3)]:
        assert shell_multiplicity(n) == signed_permutation_count(n) // 2


def test_signed_permutation_count_case_table():
    assert signed_permutation_count((1, 2, 3)) == 48
    assert signed_permutation_count((1, 1, 3)) == 24
    assert signed_permutation_count((0, 1, 2)) == 24
    assert signed_permutation_count((0, 1, 1)) == 12
    assert signed_permutation_count((0, 0, 1)) == 6
    assert signed_permutation_count((1, 1, 1)) == 8


def test_anisotropy_filter_splits_shells():
    b100 = (1.0, 0.0, 0.0)
    # distinct-triple shell: threefold split, 48 -> 16
    assert shell_multiplicity((2, 4, 6), b100) == 16
    members = orbit_sites((2, 4, 6))
    sub_sizes = {}
    for m in members:
        sub_sizes[m[0] ** 2] = sub_sizes.get(m[0] ** 2, 0) + 1
    assert sum(sub_sizes.values()) == 48
    assert sorted(sub_sizes.values()) == [16, 16, 16]
    # repeated-magnitude shells split unevenly but still partition
    members = orbit_sites((2, 2, 4))
    sub_sizes = {}
    for m in members:
        sub_sizes[m[0] ** 2] = sub_sizes.get(m[0] ** 2, 0) + 1
    assert sum(sub_sizes.values()) == 24
    assert sorted(sub_sizes.values()) == [8, 16]


def test_orbit_rejects_invalid_site():
    with pytest.raises(ValueError):
        orbit_sites((1, 2, 3))


def test_origin_is_singleton():
    assert shell_multiplicity((0, 0, 0)) == 1
    real = populate(2, 1.0, seed=0)
    assert equivalent_sites((0, 0, 0), real) == []


# -- occupancy ---------------------------------------------------------------

def test_populate_rejects_bad_abundance():
    with pytest.raises(ValueError):
        populate(2, -0.1, seed=0)
    with pytest.raises(ValueError):
        populate(2, 1.5, seed=0)


def test_populate_extremes():
    empty = populate(2, 0.0, seed=5)
    assert len(empty) == 0
    full = populate(2, 1.0, seed=5)
    assert len(full) == len(generate_sites(2)) - 1  # origin never occupied
    assert not full.contains((0, 0, 0))


def test_populate_binomial_bound():
    # N = 19 per the sizing used in production runs
    real = populate(19, 0.0467, seed=42)
    n_sites = len(generate_sites(19)) - 1
    mean = 0.0467 * n_sites
    sigma = np.sqrt(n_sites * 0.0467 * (1 - 0.0467))
    assert abs(len(real) - mean) < 3.0 * sigma


def test_populate_deterministic_and_seed_sensitive():
    a = populate(3, 0.0467, seed=7)
    b = populate(3, 0.0467, seed=7)
    c = populate(3, 0.0467, seed=8)
    assert np.array_equal(a.n_occ, b.n_occ)
    assert not np.array_equal(a.n_occ, c.n_occ)


def test_occupancy_extent_independent():
    # same seed at different extents agrees on the overlap region
    small = populate(2, 0.2, seed=11)
    large = populate(4, 0.2, seed=11)
    small_set = set(map(tuple, small.n_occ.tolist()))
    large_set = set(map(tuple, large.n_occ.tolist()))
    inner = {n for n in large_set if all(abs(c) <= 6 for c in n)}
    inner_small = {n for n in small_set if all(abs(c) <= 6 for c in n)}
    assert inner == inner_small


def test_occupied_in_ball_is_radius_cut_of_cube():
    ball = occupied_in_ball(2 * 5.43, 0.2, seed=11)
    cube = populate(2, 0.2, seed=11)
    r = cube.radii
    expect = {tuple(n) for n, keep in zip(cube.n_occ.tolist(), r <= 2 * 5.43)
              if keep}
    assert {tuple(n) for n in ball.n_occ.tolist()} == expect


def test_ensure_occupied():
    real = populate(2, 0.0, seed=1)
    site = generate_sites(2).site(10, occupied=True)
    real.ensure_occupied(site)
    assert real.contains(site.n)
    real.ensure_occupied(site)  # idempotent
    assert len(real) == 1


# -- equivalent sites --------------------------------------------------------

def test_equivalent_sites_full_occupancy():
    real = populate(2, 1.0, seed=0)
    partners = equivalent_sites((2, 4, 6), real)
    assert len(partners) == 47
    assert all(p.n != (2, 4, 6) for p in partners)


def test_equivalent_sites_symmetry_and_transitivity():
    real = populate(3, 0.3, seed=13)
    sites = [real.site_at(i) for i in range(len(real))]
    eq = {s.n: {p.n for p in equivalent_sites(s, real)} for s in sites}
    for s in sites:
        for p in eq[s.n]:
            assert s.n in eq[p]                      # symmetry
            assert eq[p] | {p} == eq[s.n] | {s.n}    # transitivity


def test_equivalent_sites_empty_realization():
    real = populate(2, 0.0, seed=0)
    assert equivalent_sites((2, 4, 6), real) == []


def test_equivalent_sites_filtered_subset():
    real = populate(3, 1.0, seed=0)
    b100 = (1.0, 0.0, 0.0)
    unfiltered = {p.n for p in equivalent_sites((2, 4, 6), real)}
    filtered = {p.n for p in equivalent_sites((2, 4, 6), real, b100)}
    assert filtered < unfiltered
    assert len(filtered) == 15  # 16-member sub-shell minus self
    assert all(p[0] ** 2 == 4 for p in filtered)


def test_mean_pair_count_on_24_shells():
    # binomial expectation: C(24,2) p^2 = 0.602 pairs per complete 24-shell
    p = 0.0467
    total_pairs = 0
    n_shells = 0
    for seed in range(150):
        real = populate(4, p, seed=seed)
        codes = real.iso_codes()
        table_codes = real.table.key_codes()
        uniq, counts = np.unique(table_codes, return_counts=True)
        shells24 = set(uniq[counts == 24].tolist())
        n_shells += len(shells24)
        occ_uniq, occ_counts = np.unique(codes, return_counts=True)
        for code, k in zip(occ_uniq.tolist(), occ_counts.tolist()):
            if code in shells24:
                total_pairs += k * (k - 1) // 2
    mean = total_pairs / n_shells
    assert abs(mean - 0.602) < 0.05


def test_lattice_csv_dump(tmp_path):
    real = populate(1, 0.5, seed=3)
    path = tmp_path / "lattice.csv"
    silattice.lattice_to_csv(real, path)
    text = path.read_text().splitlines()
    assert text[0] == "# seed = 3"
    assert text[3] == "n1,n2,n3,class,x,y,z,occupied"
    assert len(text) == 4 + len(generate_sites(1))
    occupied_rows = [l for l in text[4:] if l.endswith(",1")]
    assert len(occupied_rows) == len(real)
