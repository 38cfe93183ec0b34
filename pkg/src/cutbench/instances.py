"""Weighted MaxCut / Ising instances and exact ground-truth oracles.

An instance is a symmetric coupling matrix J over n spins with zero diagonal.
A spin configuration s in {-1,+1}^n is scored by the energy

    E(s) = -sum_{i<j} J_ij s_i s_j

(no local fields), and minimizing E is equivalent to weighted MaxCut with
edge weights w = -J.  This module generates instances, serializes them, and
exhaustively enumerates the state space to produce ground energies and exact
energy histograms, which every solver module uses as its success oracle.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

# Exhaustive enumeration is capped; beyond this the caller must supply the
# ground energy from an external source.
BRUTE_FORCE_CAP = 30

# Energies closer than this are merged into one histogram level.  Distinct
# levels of 21-weight instances are spaced at least 0.2 apart, so anything
# below ~1e-6 is safe against float accumulation error.
LEVEL_MERGE_TOL = 1e-9

_BATCH_BITS = 20


class WeightClass(str, Enum):
    """Edge-weight distributions for random instances."""

    TWENTY_ONE_WEIGHT = "21weight"  # J_ij in {-1.0, -0.9, ..., 0.9, 1.0}
    SK_BINARY = "sk"                # J_ij in {-1, +1}
    CUSTOM = "custom"


class GroundTruthUnavailable(ValueError):
    """Raised when exhaustive enumeration is refused for being too large."""


@dataclass(frozen=True)
class IsingInstance:
    """A coupling matrix with generation metadata.

    Immutable after construction; the matrix is validated (symmetric, zero
    diagonal, values consistent with the declared weight class) and marked
    read-only so instances can be shared freely across workers.
    """

    n: int
    couplings: np.ndarray
    weight_class: WeightClass = WeightClass.CUSTOM
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need at least 2 spins, got n={self.n}")
        j = np.array(self.couplings, dtype=float)
        if j.shape != (self.n, self.n):
            raise ValueError(f"coupling matrix must be {self.n}x{self.n}, got {j.shape}")
        if not np.array_equal(j, j.T):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(j) != 0.0):
            raise ValueError("coupling matrix must have zero diagonal")
        off = j[~np.eye(self.n, dtype=bool)]
        wc = WeightClass(self.weight_class)
        if wc is WeightClass.TWENTY_ONE_WEIGHT:
            scaled = off * 10.0
            if np.any(np.abs(scaled - np.round(scaled)) > 1e-9) or np.any(np.abs(off) > 1.0 + 1e-12):
                raise ValueError("21-weight instance has couplings outside {-1.0,...,1.0} step 0.1")
        elif wc is WeightClass.SK_BINARY:
            if np.any(np.abs(np.abs(off) - 1.0) > 1e-12):
                raise ValueError("SK instance has couplings outside {-1,+1}")
        j.setflags(write=False)
        object.__setattr__(self, "couplings", j)
        object.__setattr__(self, "weight_class", wc)

    def coupling_sum(self) -> float:
        """sum_{i<j} J_ij, used in the energy/cut identity."""
        return float(np.triu(self.couplings, 1).sum())

    def instance_id(self) -> str:
        return f"n{self.n:03d}_{self.weight_class.value}_s{self.seed & 0xFFFFFFFFFFFFFFFF:x}"


@dataclass(frozen=True)
class SpinConfig:
    """A spin assignment stored as bits; bit i = 0 means spin i = +1."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        b = np.array(self.bits, dtype=np.uint8)
        if b.ndim != 1:
            raise ValueError("bits must be a flat vector")
        if np.any(b > 1):
            raise ValueError("bits must be 0/1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return self.bits.shape[0]

    @property
    def spins(self) -> np.ndarray:
        return 1.0 - 2.0 * self.bits.astype(float)

    @classmethod
    def from_spins(cls, spins) -> "SpinConfig":
        s = np.asarray(spins)
        return cls(((1 - np.sign(s)) // 2).astype(np.uint8))

    @classmethod
    def from_index(cls, index: int, n: int) -> "SpinConfig":
        """Decode a basis-state index; bit j of the index is spin j."""
        return cls(np.array([(index >> j) & 1 for j in range(n)], dtype=np.uint8))

    def flipped(self) -> "SpinConfig":
        return SpinConfig(1 - self.bits)


@dataclass(frozen=True)
class GroundState:
    energy: float
    degeneracy: int
    witness: SpinConfig


@dataclass(frozen=True)
class EnergyHistogram:
    """Exact (energy level, degeneracy) table of an instance.

    Levels are strictly increasing; degeneracies sum to 2^n and are all even
    because E(s) = E(-s).
    """

    energies: np.ndarray
    degeneracies: np.ndarray
    n: int

    def __post_init__(self) -> None:
        e = np.array(self.energies, dtype=float)
        d = np.array(self.degeneracies, dtype=np.int64)
        if e.shape != d.shape or e.ndim != 1 or e.size == 0:
            raise ValueError("energies and degeneracies must be matching non-empty vectors")
        if np.any(np.diff(e) <= 0):
            raise ValueError("energies must be strictly increasing")
        if np.any(d <= 0):
            raise ValueError("degeneracies must be positive")
        if int(d.sum()) != (1 << self.n):
            raise ValueError(f"degeneracies sum to {int(d.sum())}, expected 2^{self.n}")
        e.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "degeneracies", d)

    @property
    def num_levels(self) -> int:
        return int(self.energies.size)

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_degeneracy(self) -> int:
        return int(self.degeneracies[0])

    @property
    def total_states(self) -> int:
        return int(self.degeneracies.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["energy", "degeneracy"])
            for e, d in zip(self.energies, self.degeneracies):
                writer.writerow([repr(float(e)), int(d)])

    @classmethod
    def from_csv(cls, path) -> "EnergyHistogram":
        energies, degs = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                energies.append(float(row["energy"]))
                degs.append(int(row["degeneracy"]))
        total = sum(degs)
        n = int(round(math.log2(total)))
        if (1 << n) != total:
            raise ValueError(f"degeneracies sum to {total}, not a power of two")
        return cls(np.array(energies), np.array(degs), n)


def generate_instance(n: int, weight_class: WeightClass, seed: int) -> IsingInstance:
    """Random instance with i.i.d. edge weights from the class's value set.

    Deterministic for a fixed (n, weight_class, seed).
    """
    if n < 2:
        raise ValueError(f"need at least 2 spins, got n={n}")
    wc = WeightClass(weight_class)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 64) - 1)))
    m = n * (n - 1) // 2
    if wc is WeightClass.TWENTY_ONE_WEIGHT:
        vals = rng.integers(-10, 11, size=m) / 10.0
    elif wc is WeightClass.SK_BINARY:
        vals = rng.integers(0, 2, size=m) * 2.0 - 1.0
    else:
        raise ValueError("custom instances must be built directly from a coupling matrix")
    j = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    j[iu] = vals
    j += j.T
    return IsingInstance(n=n, couplings=j, weight_class=wc, seed=int(seed))


def _check_length(instance: IsingInstance, config: SpinConfig) -> None:
    if len(config) != instance.n:
        raise ValueError(f"config has {len(config)} spins, instance has {instance.n}")


def energy(instance: IsingInstance, config: SpinConfig) -> float:
    """E(s) = -sum_{i<j} J_ij s_i s_j."""
    _check_length(instance, config)
    s = config.spins
    return float(-0.5 * s @ instance.couplings @ s)


def cut_value(instance: IsingInstance, config: SpinConfig) -> float:
    """Total weight of cut edges, with weights w = -J.

    Satisfies E(s) = -sum_{i<j} J_ij - 2 * cut(s).
    """
    _check_length(instance, config)
    s = config.spins
    same = np.outer(s, s)
    return float(((-instance.couplings) * (1.0 - same)).sum() / 4.0)


def _batch_energies(j: np.ndarray, indices: np.ndarray, n_bits: int) -> np.ndarray:
    """Energies of the basis states `indices`, decoded over `n_bits` bits."""
    shifts = np.arange(n_bits, dtype=np.int64)
    bits = (indices[:, None] >> shifts) & 1
    spins = 1.0 - 2.0 * bits.astype(float)
    return -0.5 * np.einsum("bi,bi->b", spins @ j, spins)


def _enumeration_guard(instance: IsingInstance, cap: int) -> None:
    if instance.n > cap:
        raise GroundTruthUnavailable(
            f"n={instance.n} exceeds the exhaustive-search cap ({cap}); "
            "supply the ground energy externally"
        )


def brute_force_ground(instance: IsingInstance, cap: int = BRUTE_FORCE_CAP) -> GroundState:
    """Exact ground energy, degeneracy, and one minimizing configuration.

    Enumerates half the state space (spin n-1 pinned to +1) and doubles the
    count, exploiting E(s) = E(-s).
    """
    _enumeration_guard(instance, cap)
    j = instance.couplings
    half_bits = instance.n - 1
    total = 1 << half_bits
    batch = 1 << min(_BATCH_BITS, half_bits)

    best = math.inf
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total), dtype=np.int64)
        best = min(best, float(_batch_energies(j, idx, instance.n).min()))

    count = 0
    witness_index = None
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total), dtype=np.int64)
        e = _batch_energies(j, idx, instance.n)
        mask = e <= best + LEVEL_MERGE_TOL
        hits = int(mask.sum())
        if hits and witness_index is None:
            witness_index = int(idx[np.argmax(mask)])
        count += hits
    return GroundState(
        energy=best,
        degeneracy=2 * count,
        witness=SpinConfig.from_index(witness_index, instance.n),
    )


def energy_histogram(instance: IsingInstance, cap: int = BRUTE_FORCE_CAP) -> EnergyHistogram:
    """Exact level/degeneracy table over all 2^n configurations."""
    _enumeration_guard(instance, cap)
    j = instance.couplings
    half_bits = instance.n - 1
    total = 1 << half_bits
    batch = 1 << min(_BATCH_BITS, half_bits)

    counts: dict[float, int] = {}
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total), dtype=np.int64)
        vals, cnt = np.unique(_batch_energies(j, idx, instance.n), return_counts=True)
        for v, c in zip(vals, cnt):
            key = float(v)
            counts[key] = counts.get(key, 0) + int(c)

    # Merge keys closer than the tolerance (float accumulation scatter).
    keys = sorted(counts)
    energies: list[float] = []
    degs: list[int] = []
    for k in keys:
        if energies and k - energies[-1] < LEVEL_MERGE_TOL:
            degs[-1] += counts[k]
        else:
            energies.append(k)
            degs.append(counts[k])
    return EnergyHistogram(
        energies=np.array(energies),
        degeneracies=2 * np.array(degs, dtype=np.int64),
        n=instance.n,
    )


def energy_table(instance: IsingInstance, max_bits: int = 24) -> np.ndarray:
    """E(x) for every basis index x, as one dense vector of length 2^n."""
    if instance.n > max_bits:
        raise GroundTruthUnavailable(
            f"dense energy table refused for n={instance.n} > {max_bits}"
        )
    idx = np.arange(1 << instance.n, dtype=np.int64)
    return _batch_energies(instance.couplings, idx, instance.n)


def save_instance(instance: IsingInstance, path) -> None:
    """Write the instance as JSON with upper-triangle edges only."""
    iu = np.triu_indices(instance.n, 1)
    edges = [
        [int(i), int(k), float(instance.couplings[i, k])]
        for i, k in zip(*iu)
    ]
    doc = {
        "version": 1,
        "n": instance.n,
        "weight_class": instance.weight_class.value,
        "seed": int(instance.seed),
        "edges": edges,
    }
    Path(path).write_text(json.dumps(doc, indent=None, separators=(",", ":")) + "\n")


def load_instance(path) -> IsingInstance:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ValueError(f"unsupported instance file version: {doc.get('version')!r}")
    n = int(doc["n"])
    j = np.zeros((n, n))
    for i, k, val in doc["edges"]:
        if not (0 <= i < k < n):
            raise ValueError(f"bad edge indices ({i}, {k}) for n={n}")
        j[i, k] = j[k, i] = float(val)
    return IsingInstance(
        n=n,
        couplings=j,
        weight_class=WeightClass(doc["weight_class"]),
        seed=int(doc["seed"]),
    )
