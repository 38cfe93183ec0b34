"""Instance generation, energy/cut scoring, and exhaustive oracles."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutbench import instances as I


def ferromagnet(n=2):
    j = np.ones((n, n)) - np.eye(n)
    return I.IsingInstance(n, j)


def naive_ground(instance):
    """Independent O(2^n n^2) enumerator used as the brute-force oracle."""
    best = None
    count = 0
    witness = None
    for x in range(1 << instance.n):
        s = [1.0 - 2.0 * ((x >> i) & 1) for i in range(instance.n)]
        e = 0.0
        for i in range(instance.n):
            for k in range(i + 1, instance.n):
                e -= instance.couplings[i, k] * s[i] * s[k]
        if best is None or e < best - 1e-9:
            best, count, witness = e, 1, x
        elif abs(e - best) <= 1e-9:
            count += 1
    return best, count, witness


class TestGeneration:
    def test_values_21_weight(self):
        inst = I.generate_instance(30, I.WeightClass.TWENTY_ONE_WEIGHT, 5)
        off = inst.couplings[~np.eye(30, dtype=bool)]
        assert np.all(np.abs(off * 10 - np.round(off * 10)) < 1e-12)
        assert np.all(np.abs(off) <= 1.0)
        # all 21 values show up across a matrix this large
        assert len(np.unique(off)) == 21

    def test_values_sk(self):
        inst = I.generate_instance(12, I.WeightClass.SK_BINARY, 5)
        off = inst.couplings[~np.eye(12, dtype=bool)]
        assert set(np.unique(off)) == {-1.0, 1.0}

    def test_n2_sk_admissible(self):
        inst = I.generate_instance(2, I.WeightClass.SK_BINARY, 123)
        assert inst.couplings[0, 1] in (-1.0, 1.0)

    def test_deterministic(self):
        a = I.generate_instance(10, I.WeightClass.TWENTY_ONE_WEIGHT, 99)
        b = I.generate_instance(10, I.WeightClass.TWENTY_ONE_WEIGHT, 99)
        assert np.array_equal(a.couplings, b.couplings)
        c = I.generate_instance(10, I.WeightClass.TWENTY_ONE_WEIGHT, 100)
        assert not np.array_equal(a.couplings, c.couplings)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            I.generate_instance(1, I.WeightClass.SK_BINARY, 0)

    def test_rejects_asymmetric(self):
        j = np.zeros((3, 3))
        j[0, 1] = 1.0
        with pytest.raises(ValueError):
            I.IsingInstance(3, j)

    def test_rejects_nonzero_diagonal(self):
        j = np.eye(2)
        with pytest.raises(ValueError):
            I.IsingInstance(2, j)


class TestEnergyAndCut:
    def test_two_spin_energy(self):
        inst = ferromagnet()
        up = I.SpinConfig.from_spins([1, 1])
        mixed = I.SpinConfig.from_spins([1, -1])
        assert I.energy(inst, up) == -1.0
        assert I.energy(inst, mixed) == 1.0

    def test_two_spin_cut(self):
        j = np.array([[0.0, -1.0], [-1.0, 0.0]])  # w = +1
        inst = I.IsingInstance(2, j)
        assert I.cut_value(inst, I.SpinConfig.from_spins([1, -1])) == 1.0

    def test_uniform_config_cuts_nothing(self):
        inst = I.generate_instance(7, I.WeightClass.TWENTY_ONE_WEIGHT, 3)
        assert I.cut_value(inst, I.SpinConfig(np.zeros(7, dtype=np.uint8))) == 0.0

    def test_length_mismatch_rejected(self):
        inst = ferromagnet()
        with pytest.raises(ValueError):
            I.energy(inst, I.SpinConfig(np.zeros(3, dtype=np.uint8)))
        with pytest.raises(ValueError):
            I.cut_value(inst, I.SpinConfig(np.zeros(3, dtype=np.uint8)))

    def test_energy_cut_identity(self):
        rng = np.random.default_rng(0)
        inst = I.generate_instance(5, I.WeightClass.TWENTY_ONE_WEIGHT, 17)
        total = inst.coupling_sum()
        for _ in range(100):
            cfg = I.SpinConfig(rng.integers(0, 2, size=5).astype(np.uint8))
            lhs = I.energy(inst, cfg)
            rhs = -total - 2.0 * I.cut_value(inst, cfg)
            assert abs(lhs - rhs) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(2, 8), seed=st.integers(0, 2**32 - 1),
           cfg_bits=st.integers(0, 2**8 - 1))
    def test_flip_symmetry(self, n, seed, cfg_bits):
        inst = I.generate_instance(n, I.WeightClass.TWENTY_ONE_WEIGHT, seed)
        cfg = I.SpinConfig.from_index(cfg_bits % (1 << n), n)
        assert I.energy(inst, cfg) == pytest.approx(I.energy(inst, cfg.flipped()), abs=1e-12)
        assert I.cut_value(inst, cfg) == pytest.approx(I.cut_value(inst, cfg.flipped()), abs=1e-12)


class TestBruteForce:
    def test_two_spin_ferromagnet(self):
        g = I.brute_force_ground(ferromagnet())
        assert g.energy == -1.0
        assert g.degeneracy == 2

    def test_three_spin_ferromagnet(self):
        g = I.brute_force_ground(ferromagnet(3))
        assert g.energy == -3.0
        assert g.degeneracy == 2

    def test_matches_naive_enumeration(self):
        inst = I.generate_instance(12, I.WeightClass.TWENTY_ONE_WEIGHT, 21)
        g = I.brute_force_ground(inst)
        e_naive, deg_naive, _ = naive_ground(inst)
        assert g.energy == pytest.approx(e_naive, abs=1e-9)
        assert g.degeneracy == deg_naive
        assert I.energy(inst, g.witness) == pytest.approx(g.energy, abs=1e-9)

    def test_cap_rejected_with_explicit_error(self):
        inst = I.generate_instance(8, I.WeightClass.SK_BINARY, 1)
        with pytest.raises(I.GroundTruthUnavailable, match="supply the ground energy"):
            I.brute_force_ground(inst, cap=6)


class TestHistogram:
    def test_two_spin_levels(self):
        hist = I.energy_histogram(ferromagnet())
        assert np.allclose(hist.energies, [-1.0, 1.0])
        assert np.array_equal(hist.degeneracies, [2, 2])

    def test_totals_and_parity(self):
        inst = I.generate_instance(11, I.WeightClass.TWENTY_ONE_WEIGHT, 33)
        hist = I.energy_histogram(inst)
        assert hist.total_states == 2**11
        assert np.all(hist.degeneracies % 2 == 0)
        assert np.all(np.diff(hist.energies) > 0)

    def test_ground_level_matches_brute_force(self):
        inst = I.generate_instance(12, I.WeightClass.TWENTY_ONE_WEIGHT, 44)
        hist = I.energy_histogram(inst)
        g = I.brute_force_ground(inst)
        assert hist.ground_energy == pytest.approx(g.energy, abs=1e-12)
        assert hist.ground_degeneracy == g.degeneracy

    def test_bell_like_shape(self):
        # mass concentrates in the middle of the spectrum, not the edges
        inst = I.generate_instance(15, I.WeightClass.TWENTY_ONE_WEIGHT, 7)
        hist = I.energy_histogram(inst)
        k = hist.num_levels
        middle = hist.degeneracies[k // 4: 3 * k // 4].sum()
        assert middle > 0.5 * hist.total_states
        assert hist.degeneracies[0] < hist.degeneracies.max() / 10

    def test_csv_round_trip(self, tmp_path):
        inst = I.generate_instance(8, I.WeightClass.TWENTY_ONE_WEIGHT, 9)
        hist = I.energy_histogram(inst)
        path = tmp_path / "hist.csv"
        hist.to_csv(path)
        back = I.EnergyHistogram.from_csv(path)
        assert np.array_equal(back.energies, hist.energies)
        assert np.array_equal(back.degeneracies, hist.degeneracies)
        assert back.n == hist.n

    def test_energy_table_agrees_with_scoring(self):
        inst = I.generate_instance(6, I.WeightClass.TWENTY_ONE_WEIGHT, 2)
        table = I.energy_table(inst)
        for x in (0, 1, 17, 63):
            cfg = I.SpinConfig.from_index(x, 6)
            assert table[x] == pytest.approx(I.energy(inst, cfg), abs=1e-12)


class TestSerialization:
    def test_json_round_trip(self, tmp_path):
        inst = I.generate_instance(9, I.WeightClass.TWENTY_ONE_WEIGHT, 5150)
        path = tmp_path / "inst.json"
        I.save_instance(inst, path)
        back = I.load_instance(path)
        assert back.n == inst.n
        assert back.seed == inst.seed
        assert back.weight_class == inst.weight_class
        assert np.array_equal(back.couplings, inst.couplings)

    def test_byte_identical_rewrite(self, tmp_path):
        inst = I.generate_instance(6, I.WeightClass.SK_BINARY, 8)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        I.save_instance(inst, p1)
        I.save_instance(inst, p2)
        assert p1.read_bytes() == p2.read_bytes()
