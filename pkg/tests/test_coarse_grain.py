import math

import numpy as np
import pytest
from scipy.stats import binom

from macrospin import coarse_grain as cg
from macrospin import spin_core as sc
from macrospin import (
    DensityOperator,
    Direction,
    SpinJ,
    approx_slot_probs_via_q,
    build_grid,
    cat_gap,
    cat_state,
    coherent_state,
    exact_slot_probs,
    invasiveness,
    luders_update,
    make_partition,
    mixture_residual,
    nonselective_update,
    partition_grid,
    q_function,
    sample_slot,
    slot_bands,
)
from conftest import coherent_superposition

FOUR_PI = 4 * math.pi


# ---------------------------------------------------------------------------
# partitions and bands


def test_partition_examples():
    assert make_partition(SpinJ(2), 1).slots == ((0, 0), (1, 1), (2, 2))
    assert make_partition(SpinJ(2), 3).slots == ((0, 2),)
    p = make_partition(SpinJ(5), 2)
    assert p.slots == ((0, 1), (2, 3), (4, 5))
    assert [p.m_bounds(i) for i in range(3)] == [(-2.5, -1.5), (-0.5, 0.5), (1.5, 2.5)]


def test_partition_remainder_slot():
    p = make_partition(SpinJ(10), 4)  # dim 11 = 4 + 4 + 3
    assert p.slots == ((0, 3), (4, 7), (8, 10))
    assert p.slots[-1][1] - p.slots[-1][0] + 1 == 3


def test_partition_delta_m_range():
    with pytest.raises(ValueError):
        make_partition(SpinJ(4), 0)
    with pytest.raises(ValueError):
        make_partition(SpinJ(4), 6)


def test_bands_whole_sphere_and_midpoint():
    assert [(b.cos_lo, b.cos_hi) for b in slot_bands(make_partition(SpinJ(7), 8))] == [(-1.0, 1.0)]
    bands = slot_bands(make_partition(SpinJ(1), 1))
    assert [(b.cos_lo, b.cos_hi) for b in bands] == [(-1.0, 0.0), (0.0, 1.0)]


def test_bands_tile_exactly():
    for twice_j, dm in ((9, 2), (20, 7), (13, 13)):
        bands = slot_bands(make_partition(SpinJ(twice_j), dm))
        assert bands[0].cos_lo == -1.0 and bands[-1].cos_hi == 1.0
        for a, b in zip(bands[:-1], bands[1:]):
            assert a.cos_hi == b.cos_lo
        assert sum(b.cos_hi - b.cos_lo for b in bands) == pytest.approx(2.0, abs=1e-15)


def test_band_measure_equals_mixed_probability():
    """Solid-angle fraction of each band = Delta_m/(2j+1) exactly under the
    midpoint mapping."""
    j = SpinJ(15)
    part = make_partition(j, 4)
    exact = exact_slot_probs(DensityOperator.maximally_mixed(j), part).probabilities
    for band, p in zip(slot_bands(part), exact):
        assert abs((band.cos_hi - band.cos_lo) / 2.0 - p) <= 1e-15


def test_dichotomic_sign_tie_rule():
    part = make_partition(SpinJ(4), 5)  # single slot straddling zero
    assert part.dichotomic_sign(0) == 1
    part = make_partition(SpinJ(1), 1)
    assert [part.dichotomic_sign(i) for i in range(2)] == [-1, 1]


# ---------------------------------------------------------------------------
# exact probabilities


def test_exact_probs_uniform_slots():
    j = SpinJ(11)
    part = make_partition(j, 3)
    probs = exact_slot_probs(DensityOperator.maximally_mixed(j), part).probabilities
    assert np.abs(probs - 3.0 / 12.0).max() <= 1e-15


def test_exact_probs_top_state():
    j = SpinJ(10)
    part = make_partition(j, 4)
    probs = exact_slot_probs(sc.PureState.basis_state(j, j.dim - 1), part).probabilities
    assert probs[-1] == 1.0 and probs[:-1].max() == 0.0


def test_exact_probs_coherent_binomial_oracle(rng):
    j = SpinJ(60)
    theta = 1.1
    part = make_partition(j, 7)
    st = coherent_state(j, Direction(theta, 0.4))
    got = exact_slot_probs(st, part).probabilities
    pmf = binom.pmf(np.arange(j.dim), j.twice_j, math.cos(theta / 2) ** 2)
    oracle = np.add.reduceat(pmf, [k for k, _ in part.slots])
    assert np.abs(got - oracle).max() <= 1e-13


# ---------------------------------------------------------------------------
# Q band integrals (Eq. 1)


def test_approx_probs_mixed_state_exact():
    j = SpinJ(21)
    part = make_partition(j, 4)
    grid = partition_grid(part)
    q = q_function(DensityOperator.maximally_mixed(j), grid)
    approx = approx_slot_probs_via_q(q, slot_bands(part))
    exact = exact_slot_probs(DensityOperator.maximally_mixed(j), part)
    assert np.abs(approx.probabilities - exact.probabilities).max() <= 1e-10
    assert abs(approx.raw_total - 1.0) <= 1e-12


def test_approx_probs_coarse_regime(rng):
    """j=100, delta_m = 50 = 5 sqrt(j): pilot-frozen regression bound 0.02."""
    j = SpinJ(200)
    st = coherent_state(j, Direction(2.6, 0.0))
    part = make_partition(j, 50)
    grid = partition_grid(part)
    approx = approx_slot_probs_via_q(q_function(st, grid), slot_bands(part))
    exact = exact_slot_probs(st, part)
    assert np.abs(approx.probabilities - exact.probabilities).max() <= 0.02


def test_approx_probs_fine_vs_coarse(rng):
    """delta_m = 1 sits outside the coarseness regime: only the comparative
    claim (coarse error < fine error) is made."""
    j = SpinJ(200)
    st = coherent_state(j, Direction(2.6, 0.0))
    errs = {}
    for dm in (1, 50):
        part = make_partition(j, dm)
        grid = partition_grid(part)
        approx = approx_slot_probs_via_q(q_function(st, grid), slot_bands(part))
        exact = exact_slot_probs(st, part)
        errs[dm] = np.abs(approx.probabilities - exact.probabilities).max()
    assert errs[50] < errs[1]
    assert errs[1] > 0.01


def test_eq1_error_nonincreasing_doubling_j25():
    j = SpinJ(50)
    st = coherent_state(j, Direction(2.6, 0.0))
    errs = []
    for mult in (1, 2, 4, 8):
        part = make_partition(j, mult * 5)
        grid = partition_grid(part)
        approx = approx_slot_probs_via_q(q_function(st, grid), slot_bands(part))
        exact = exact_slot_probs(st, part)
        errs.append(np.abs(approx.probabilities - exact.probabilities).max())
    assert all(errs[i] >= errs[i + 1] - 1e-12 for i in range(len(errs) - 1))


# ---------------------------------------------------------------------------
# state updates


def test_luders_diagonal_restriction(rng):
    j = SpinJ(8)
    part = make_partition(j, 3)
    diag = rng.uniform(0.1, 1.0, j.dim)
    diag /= diag.sum()
    rho = DensityOperator(j, np.diag(diag).astype(complex))
    reduced, prob = luders_update(rho, part, 1)
    sl = part.slot_slice(1)
    assert abs(prob - diag[sl].sum()) <= 1e-15
    expected = np.zeros(j.dim)
    expected[sl] = diag[sl] / diag[sl].sum()
    assert np.abs(np.diagonal(reduced.matrix).real - expected).max() <= 1e-14


def test_luders_cat_top_slot():
    j = SpinJ(30)
    part = make_partition(j, 16)  # two slots separating -j from +j
    reduced, prob = luders_update(cat_state(j).density(), part, 1)
    assert abs(prob - 0.5) <= 1e-15
    expected = np.zeros((j.dim, j.dim), dtype=complex)
    expected[-1, -1] = 1.0
    assert np.abs(reduced.matrix - expected).max() == 0.0


def test_luders_output_valid_density(rng):
    j = SpinJ(12)
    part = make_partition(j, 5)
    rho = sc.random_density(j, rng)
    reduced, prob = luders_update(rho, part, 0)
    assert abs(np.trace(reduced.matrix) - 1.0) <= 1e-12
    reduced.validate_psd()


def test_luders_zero_probability_slot():
    j = SpinJ(6)
    part = make_partition(j, 2)
    with pytest.raises(ValueError, match="probability"):
        luders_update(sc.PureState.basis_state(j, j.dim - 1).density(), part, 0)


def test_nonselective_cat_collapse():
    j = SpinJ(24)
    rho = cat_state(j).density()
    for dm in (5, 13, 14):
        part = make_partition(j, dm)
        out = nonselective_update(rho, part)
        # cross-slot coherences are killed exactly; the diagonal is untouched
        assert out.matrix[0, -1] == 0.0 and out.matrix[-1, 0] == 0.0
        assert np.abs(np.diagonal(out.matrix) - np.diagonal(rho.matrix)).max() == 0.0
        expected = np.zeros((j.dim, j.dim), dtype=complex)
        expected[0, 0] = expected[-1, -1] = 0.5
        assert np.abs(out.matrix - expected).max() <= 1e-15


def test_nonselective_fixed_point_and_idempotence(rng):
    j = SpinJ(14)
    part = make_partition(j, 4)
    rho = sc.random_density(j, rng)
    once = nonselective_update(rho, part)
    twice = nonselective_update(once, part)
    assert np.abs(once.matrix - twice.matrix).max() <= 1e-13
    assert abs(np.trace(once.matrix).real - 1.0) <= 1e-13


# ---------------------------------------------------------------------------
# mixture identity and invasiveness


def test_mixture_residual_block_diagonal(rng):
    for twice_j in (8, 30, 100):
        j = SpinJ(twice_j)
        part = make_partition(j, max(2, twice_j // 5))
        rho = nonselective_update(sc.random_density(j, rng), part)
        grid = build_grid(twice_j)
        assert mixture_residual(rho, part, grid) <= 1e-12


def test_mixture_residual_cat_closed_form():
    j = SpinJ(40)
    part = make_partition(j, 21)
    grid = build_grid(j.twice_j)
    res = mixture_residual(cat_state(j).density(), part, grid)
    closed = j.dim / FOUR_PI * 4.0 ** (-j.j)
    assert res == pytest.approx(closed, rel=1e-12)


def test_mixture_residual_coherent_coarse(rng):
    """Pilot-frozen: residual <= 1e-3 (2j+1)/(4pi) at j=100, delta_m=50."""
    j = SpinJ(200)
    part = make_partition(j, 50)
    grid = build_grid(j.twice_j)
    rho = coherent_state(j, Direction(2.6, 0.0)).density()
    assert mixture_residual(rho, part, grid) <= 1e-3 * j.dim / FOUR_PI


def test_residual_equals_sup_invasiveness(rng):
    j = SpinJ(60)
    part = make_partition(j, 9)
    grid = build_grid(j.twice_j)
    rho = sc.random_density(j, rng)
    assert abs(mixture_residual(rho, part, grid) - invasiveness(rho, part, grid, "sup")) <= 1e-13


def test_invasiveness_block_diagonal_zero(rng):
    j = SpinJ(22)
    part = make_partition(j, 6)
    rho = nonselective_update(sc.random_density(j, rng), part)
    grid = build_grid(j.twice_j)
    assert invasiveness(rho, part, grid, "sup") <= 1e-12
    assert invasiveness(rho, part, grid, "L1") <= 1e-12


def test_invasiveness_cat_sup_closed_form():
    for twice_j in (4, 12, 20):
        j = SpinJ(twice_j)
        part = make_partition(j, j.dim // 2 + 1)
        grid = cg.cat_gap_grid(j)
        got = invasiveness(cat_state(j).density(), part, grid, "sup")
        assert got == pytest.approx(j.dim / FOUR_PI * 4.0 ** (-j.j), rel=1e-12)


def test_invasiveness_monotone_delta_m_doubling(rng):
    j = SpinJ(100)
    st = coherent_superposition(j, Direction(math.pi / 3, 0.0), Direction(2 * math.pi / 3, math.pi / 2))
    grid = build_grid(j.twice_j)
    dms, vals = [], []
    dm = 1
    while dm <= j.dim:
        vals.append(invasiveness(st, make_partition(j, dm), grid, "L1"))
        dms.append(dm)
        dm *= 2
    vals.append(invasiveness(st, make_partition(j, j.dim), grid, "L1"))
    assert all(vals[i] >= vals[i + 1] - 1e-12 for i in range(len(vals) - 1))
    assert vals[-1] <= 1e-12  # single slot never disturbs


# ---------------------------------------------------------------------------
# cat state and gap


def test_cat_state_amplitudes():
    st = cat_state(SpinJ(9))
    assert abs(st.amplitudes[0] - 1 / math.sqrt(2)) <= 1e-15
    assert abs(st.amplitudes[-1] - 1 / math.sqrt(2)) <= 1e-15
    assert np.abs(st.amplitudes[1:-1]).max() == 0.0


def test_cat_gap_spin_half_brute_force():
    """j=1/2: gap = 1/(4pi); brute-force |Q_cat - Q_mix| on a fine grid
    agrees with the cross-term evaluation."""
    j = SpinJ(1)
    assert cat_gap(j) == pytest.approx(1.0 / FOUR_PI, abs=1e-12)
    grid = build_grid(64)
    from macrospin.phase_space import q_values_pure

    q_cat = q_values_pure(j, grid, cat_state(j).amplitudes)
    top = np.array([0.0, 1.0], dtype=complex)
    bot = np.array([1.0, 0.0], dtype=complex)
    q_mix = 0.5 * (q_values_pure(j, grid, top) + q_values_pure(j, grid, bot))
    brute = np.abs(q_cat - q_mix)
    # Delta Q = sin(theta) cos(phi) / (4 pi) at j = 1/2
    thetas = np.repeat(grid.thetas, grid.n_phi)
    phis = np.tile(grid.phis, grid.n_theta)
    assert np.abs(brute - np.abs(np.sin(thetas) * np.cos(phis)) / FOUR_PI).max() <= 1e-12
    assert abs(brute.max() - cat_gap(j, grid)) <= 1e-12


def test_cat_gap_matches_closed_form():
    for twice_j in list(range(1, 61, 3)) + [60]:
        j = SpinJ(twice_j)
        closed = j.dim / FOUR_PI * 4.0 ** (-j.j)
        assert cat_gap(j) == pytest.approx(closed, rel=1e-10)


def test_cat_gap_log_ratio():
    for jj in range(1, 20):
        lhs = math.log(cat_gap(SpinJ(2 * jj))) - math.log(cat_gap(SpinJ(2 * jj + 2)))
        rhs = 2 * math.log(2.0) - math.log((2 * jj + 3) / (2 * jj + 1))
        assert abs(lhs - rhs) <= 1e-9


def test_cat_gap_macroscopically_negligible_at_j25():
    j = SpinJ(50)
    assert cat_gap(j) < 1e-13 * j.dim / FOUR_PI * 1e4


# ---------------------------------------------------------------------------
# sampling


def test_sample_slot_deterministic_input():
    j = SpinJ(10)
    part = make_partition(j, 3)
    rho = sc.PureState.basis_state(j, j.dim - 1).density()
    rng = np.random.default_rng(0)
    for _ in range(20):
        mbar, reduced = sample_slot(rho, part, rng)
        assert mbar == part.n_slots - 1
        assert np.abs(reduced.matrix - rho.matrix).max() == 0.0


def test_sample_slot_frequencies_within_3_sigma():
    j = SpinJ(3)
    part = make_partition(j, 2)  # two slots
    st = coherent_state(j, Direction(1.9, 0.0)).density()
    probs = exact_slot_probs(st, part).probabilities
    rng = np.random.default_rng(321)
    n = 100_000
    counts = np.zeros(part.n_slots)
    for _ in range(n):
        mbar, _ = sample_slot(st, part, rng)
        counts[mbar] += 1
    sigma = np.sqrt(probs * (1 - probs) / n)
    assert np.all(np.abs(counts / n - probs) <= 3 * sigma)


def test_sample_slot_seed_reproducibility(rng):
    j = SpinJ(12)
    part = make_partition(j, 3)
    st = coherent_state(j, Direction(1.2, 0.5)).density()
    seq1 = [sample_slot(st, part, np.random.default_rng(99))[0] for _ in range(1)]
    a = np.random.default_rng(1234)
    b = np.random.default_rng(1234)
    seq_a = [sample_slot(st, part, a)[0] for _ in range(25)]
    seq_b = [sample_slot(st, part, b)[0] for _ in range(25)]
    assert seq_a == seq_b


# ---------------------------------------------------------------------------
# serialization


def test_slot_table_csv(tmp_path):
    j = SpinJ(5)
    part = make_partition(j, 2)
    st = coherent_state(j, Direction(2.0, 0.0))
    grid = partition_grid(part)
    exact = exact_slot_probs(st, part)
    approx = approx_slot_probs_via_q(q_function(st, grid), slot_bands(part))
    path = tmp_path / "slots.csv"
    cg.write_slot_table(path, part, exact, approx)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "mbar,m_lo,m_hi,p_exact,p_approx,abs_err"
    assert len(lines) == 1 + part.n_slots
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == -2.5 and float(first[2]) == -1.5
