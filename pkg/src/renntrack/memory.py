"""Bounded exemplar memory with multiplicative forgetting and stale-item eviction.

The store keeps identity-labelled descriptors together with two scalars per
item: an *eligibility* in (0, 1] that is multiplied down every time the item
matches a fresh observation, and an *age* counting frames since the item last
matched. Items are dropped through two complementary paths:

* eligibility falling below a removal threshold (redundant items that keep
  matching decay away), and
* overflow eviction of the oldest items when the store exceeds its capacity
  (items that never match again would otherwise occupy space forever).

Descriptors live in one contiguous ``(n, d)`` float64 block so a matcher can
consume the whole store as a single batch without copying.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence, Set
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractionViolationError, DescriptorError, StreamFormatError

_INITIAL_ALLOC = 256


def unit_normalize(vec: np.ndarray) -> np.ndarray:
    """Return *vec* scaled to unit L2 norm; zero vectors are rejected."""
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DescriptorError("zero-norm descriptor cannot be normalized")
    return vec / norm


@dataclass(frozen=True)
class MemoryItem:
    """Immutable snapshot of one stored exemplar."""

    item_key: int
    identity: int
    eligibility: float
    age: int
    descriptor: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, MemoryItem):
            return NotImplemented
        return (
            self.item_key == other.item_key
            and self.identity == other.identity
            and self.eligibility == other.eligibility
            and self.age == other.age
            and np.array_equal(self.descriptor, other.descriptor)
        )


@dataclass
class MemoryStats:
    """Read-only usage summary of a store."""

    size: int
    per_identity: dict[int, int]
    eligibility_hist: tuple[np.ndarray, np.ndarray]  # (counts, bin edges)
    age_hist: dict[int, int]


class MemoryStore:
    """Mutable exemplar memory. Single-writer; snapshots are safe to share.

    Parameters
    ----------
    dimension:
        Descriptor dimensionality ``d``.
    capacity:
        Hard upper bound on the number of stored items at the end of every
        update cycle.
    e_bar:
        Eligibility removal threshold in (0, 1). An item whose eligibility
        drops below it is removed in the same update.
    normalize:
        L2-normalize descriptors at insertion. Disable for raw scalar
        descriptors (e.g. one-dimensional simulations).
    """

    def __init__(self, dimension: int, capacity: int, e_bar: float = 0.5,
                 normalize: bool = True):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 < e_bar < 1.0:
            raise ValueError("e_bar must lie in (0, 1)")
        self.dimension = dimension
        self.capacity = capacity
        self.e_bar = e_bar
        self.normalize = normalize
        self.next_id = 0
        self.next_key = 0
        alloc = min(max(_INITIAL_ALLOC, 1), capacity + 1)
        self._desc = np.empty((alloc, dimension), dtype=np.float64)
        self._sq = np.empty(alloc, dtype=np.float64)  # squared row norms
        self._ident = np.empty(alloc, dtype=np.int64)
        self._elig = np.empty(alloc, dtype=np.float64)
        self._age = np.empty(alloc, dtype=np.int64)
        self._keys = np.empty(alloc, dtype=np.int64)
        self._n = 0
        self._row_of: dict[int, int] = {}
        self._eviction_log: list[int] = []

    def __len__(self) -> int:
        return self._n

    def __contains__(self, item_key: int) -> bool:
        return item_key in self._row_of

    # -- insertion ---------------------------------------------------------

    def insert(self, descriptor: np.ndarray, identity: int) -> int:
        """Store *descriptor* under *identity* with eligibility 1 and age 0.

        *identity* must be an already-issued Id or exactly ``next_id`` (which
        issues it). Overflow eviction runs before returning, so the store
        never ends an insert above capacity.
        """
        vec = np.asarray(descriptor, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DescriptorError(
                f"descriptor has shape {vec.shape}, expected ({self.dimension},)")
        if identity < 0 or identity > self.next_id:
            raise ValueError(
                f"identity {identity} is not issued yet (next_id={self.next_id})")
        if self.normalize:
            vec = unit_normalize(vec)
        if identity == self.next_id:
            self.next_id += 1
        row = self._n
        if row == self._desc.shape[0]:
            self._grow()
        self._desc[row] = vec
        self._sq[row] = float(vec @ vec)
        self._ident[row] = identity
        self._elig[row] = 1.0
        self._age[row] = 0
        key = self.next_key
        self._keys[row] = key
        self.next_key += 1
        self._n += 1
        self._row_of[key] = row
        if self._n > self.capacity:
            self.evict_overflow()
        return key

    def _grow(self):
        alloc = min(self._desc.shape[0] * 2, self.capacity + 1)
        self._desc = np.resize(self._desc, (alloc, self.dimension))
        self._sq = np.resize(self._sq, alloc)
        self._ident = np.resize(self._ident, alloc)
        self._elig = np.resize(self._elig, alloc)
        self._age = np.resize(self._age, alloc)
        self._keys = np.resize(self._keys, alloc)

    # -- forgetting --------------------------------------------------------

    def decay_and_touch(self, matches: Sequence[tuple[int, float]]) -> list[int]:
        """Apply one multiplicative decay step to each matched item.

        Each ``(item_key, eta)`` pair scales the item's eligibility by
        ``eta`` and resets its age to 0. Items whose new eligibility falls
        below ``e_bar`` are removed; their keys are returned. Pairs are
        applied in order; when every key is distinct the update runs as one
        vectorized batch.
        """
        if not matches:
            return []
        getrow = self._row_of.get
        rows = [getrow(key) for key, _ in matches]
        if None in rows:
            missing = matches[rows.index(None)][0]
            raise KeyError(f"item_key {missing} not in store")
        etas = np.fromiter((eta for _, eta in matches), dtype=np.float64,
                           count=len(rows))
        if ((etas <= 0.0) | (etas >= 1.0)).any():
            bad = int(np.flatnonzero((etas <= 0.0) | (etas >= 1.0))[0])
            raise ContractionViolationError(
                f"decay factor {matches[bad][1]!r} for item "
                f"{matches[bad][0]} is outside (0, 1)")
        doomed: list[int] = []
        if len(set(rows)) == len(rows):
            idx = np.asarray(rows, dtype=np.int64)
            self._elig[idx] *= etas
            self._age[idx] = 0
            below = idx[self._elig[idx] < self.e_bar]
            doomed = [int(k) for k in self._keys[below]]
        else:
            # duplicate keys: honor strict sequential semantics
            for (key, eta), row in zip(matches, rows):
                self._elig[row] *= eta
                self._age[row] = 0
            seen = set()
            for key, _ in matches:
                row = self._row_of[key]
                if key not in seen and self._elig[row] < self.e_bar:
                    doomed.append(key)
                    seen.add(key)
        if doomed:
            self._remove_keys(doomed)
        return doomed

    def age_unmatched(self, matched_keys: Set[int]) -> None:
        """Increment the age of every stored item not in *matched_keys*."""
        if self._n == 0:
            return
        if not matched_keys:
            self._age[:self._n] += 1
            return
        keep_young = np.isin(self._keys[:self._n],
                             np.fromiter(matched_keys, dtype=np.int64))
        self._age[:self._n][~keep_young] += 1

    def sweep(self) -> list[int]:
        """Remove every item below the eligibility threshold (safety net)."""
        below = self._elig[:self._n] < self.e_bar
        if not below.any():
            return []
        doomed = [int(k) for k in self._keys[:self._n][below]]
        self._remove_keys(doomed)
        return doomed

    def evict_overflow(self) -> list[int]:
        """While over capacity, evict one maximum-age item at a time.

        Ties on age are broken by lowest eligibility, then lowest item_key,
        so identical histories evict identically.
        """
        evicted: list[int] = []
        while self._n > self.capacity:
            age = self._age[:self._n]
            oldest = np.flatnonzero(age == age.max())
            if len(oldest) > 1:
                elig = self._elig[:self._n][oldest]
                oldest = oldest[elig == elig.min()]
            if len(oldest) > 1:
                keys = self._keys[:self._n][oldest]
                oldest = oldest[keys == keys.min()]
            key = int(self._keys[int(oldest[0])])
            self._remove_keys([key])
            evicted.append(key)
        if evicted:
            self._eviction_log.extend(evicted)
        return evicted

    def drain_eviction_log(self) -> list[int]:
        """Return and clear keys evicted since the last drain.

        Covers evictions triggered from inside :meth:`insert`, which callers
        otherwise could not observe.
        """
        log, self._eviction_log = self._eviction_log, []
        return log

    def remove_keys(self, keys: Iterable[int]) -> list[int]:
        """Remove the given items if still present; returns keys removed."""
        present = [k for k in keys if k in self._row_of]
        if present:
            self._remove_keys(present)
        return present

    def _remove_keys(self, keys: Sequence[int]):
        rows = sorted(self._row_of[k] for k in keys)
        keep = np.ones(self._n, dtype=bool)
        keep[rows] = False
        m = int(keep.sum())
        self._desc[:m] = self._desc[:self._n][keep]
        self._sq[:m] = self._sq[:self._n][keep]
        self._ident[:m] = self._ident[:self._n][keep]
        self._elig[:m] = self._elig[:self._n][keep]
        self._age[:m] = self._age[:self._n][keep]
        self._keys[:m] = self._keys[:self._n][keep]
        self._n = m
        self._row_of = {int(k): i for i, k in enumerate(self._keys[:m])}

    # -- read access -------------------------------------------------------

    def descriptors_view(self) -> np.ndarray:
        """Contiguous (n, d) view of all stored descriptors. Do not mutate."""
        return self._desc[:self._n]

    def sq_norms_view(self) -> np.ndarray:
        """Squared norms aligned with :meth:`descriptors_view`."""
        return self._sq[:self._n]

    def keys_view(self) -> np.ndarray:
        return self._keys[:self._n]

    def identities_view(self) -> np.ndarray:
        return self._ident[:self._n]

    def identity_of(self, item_key: int) -> int:
        return int(self._ident[self._row_of[item_key]])

    def get(self, item_key: int) -> MemoryItem:
        row = self._row_of[item_key]
        return MemoryItem(
            item_key=int(self._keys[row]),
            identity=int(self._ident[row]),
            eligibility=float(self._elig[row]),
            age=int(self._age[row]),
            descriptor=self._desc[row].copy(),
        )

    def items(self) -> list[MemoryItem]:
        return [self.get(int(k)) for k in self._keys[:self._n]]

    def stats(self) -> MemoryStats:
        """Size, per-identity counts, eligibility histogram, age histogram."""
        elig = self._elig[:self._n]
        counts, edges = np.histogram(elig, bins=10, range=(0.0, 1.0))
        ages: dict[int, int] = {}
        for a in self._age[:self._n]:
            ages[int(a)] = ages.get(int(a), 0) + 1
        per_ident: dict[int, int] = {}
        for ident in self._ident[:self._n]:
            per_ident[int(ident)] = per_ident.get(int(ident), 0) + 1
        return MemoryStats(
            size=self._n,
            per_identity=dict(sorted(per_ident.items())),
            eligibility_hist=(counts, edges),
            age_hist=dict(sorted(ages.items())),
        )

    # -- snapshots ---------------------------------------------------------

    def save(self, path) -> None:
        """Write a flat text snapshot: one header line, one line per item.

        Header: ``d capacity next_id next_key``. Item lines carry
        ``item_key identity eligibility age`` followed by the d descriptor
        components. Floats are written with full round-trip precision.
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.dimension} {self.capacity} "
                     f"{self.next_id} {self.next_key}\n")
            for row in range(self._n):
                comps = " ".join(repr(float(c)) for c in self._desc[row])
                fh.write(f"{int(self._keys[row])} {int(self._ident[row])} "
                         f"{repr(float(self._elig[row]))} "
                         f"{int(self._age[row])} {comps}\n")

    @classmethod
    def load(cls, path, e_bar: float = 0.5, normalize: bool = True) -> "MemoryStore":
        """Rebuild a store from a snapshot written by :meth:`save`."""
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 4:
                raise StreamFormatError("snapshot header must carry "
                                        "d, capacity, next_id, next_key", line=1)
            dim, capacity, next_id, next_key = (int(v) for v in header)
            store = cls(dim, capacity, e_bar=e_bar, normalize=normalize)
            for lineno, line in enumerate(fh, start=2):
                fields = line.split()
                if len(fields) != 4 + dim:
                    raise StreamFormatError(
                        f"expected {4 + dim} fields, found {len(fields)}",
                        line=lineno)
                key, ident = int(fields[0]), int(fields[1])
                elig, age = float(fields[2]), int(fields[3])
                vec = np.array([float(v) for v in fields[4:]], dtype=np.float64)
                store._append_raw(key, ident, elig, age, vec)
        store.next_id = next_id
        store.next_key = next_key
        return store

    def _append_raw(self, key: int, ident: int, elig: float, age: int,
                    vec: np.ndarray):
        # Snapshot import: trusts stored values, bypasses normalization.
        if vec.shape != (self.dimension,):
            raise DescriptorError(
                f"descriptor has shape {vec.shape}, expected ({self.dimension},)")
        row = self._n
        if row == self._desc.shape[0]:
            self._grow()
        self._desc[row] = vec
        self._sq[row] = float(vec @ vec)
        self._ident[row] = ident
        self._elig[row] = elig
        self._age[row] = age
        self._keys[row] = key
        self._n += 1
        self._row_of[key] = row
