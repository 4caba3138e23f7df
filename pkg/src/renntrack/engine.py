"""Per-frame identity assignment over a descriptor stream.

Each frame is processed in a fixed order: match the stored exemplars against
the frame, resolve multi-identity ambiguity per observation by majority vote,
enforce that an identity wins at most one observation, decay and insert for
the winners, advance the track lifecycle, enrol novel observations, then age
and prune the memory. Assignments are decided against the memory state from
*before* the frame's own insertions, so every result is produced test-first.

New identities go through a probation lifecycle: enrolled as ``candidate``,
promoted to ``tentative`` after winning in consecutive frames, ``confirmed``
on a further match inside a short survival window, or ``discarded`` with all
their provisionally stored exemplars rolled back.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import DescriptorError, SequencingError
from .matching import (MatchGroups, MatchRecord, Observation, compute_eta,
                       renn_match)
from .memory import MemoryStore, unit_normalize

__all__ = ["Assignment", "EngineConfig", "FrameResult", "IdentityEngine",
           "TrackState", "compute_eta", "enforce_uniqueness",
           "resolve_ambiguity"]

CANDIDATE = "candidate"
TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DISCARDED = "discarded"
UNASSIGNED = "unassigned"


@dataclass
class EngineConfig:
    """All engine tunables.

    ``rho_bar`` and ``alpha`` default to the published operating point of the
    matcher (distance-ratio threshold 1.6, ratio-emphasis exponent 0.01).
    """

    dimension: int
    rho_bar: float = 1.6
    alpha: float = 0.01
    e_bar: float = 0.5
    capacity: int = 10_000
    tau_abs: float = 1.0
    confirm_consecutive: int = 2
    confirm_window: int = 3
    seed: int = 0
    normalize: bool = True
    novelty_gate: bool = True

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.rho_bar <= 0:
            raise ValueError("rho_bar must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 < self.e_bar < 1.0:
            raise ValueError("e_bar must lie in (0, 1)")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.tau_abs <= 0:
            raise ValueError("tau_abs must be > 0")
        if self.confirm_consecutive < 1:
            raise ValueError("confirm_consecutive must be >= 1")
        if self.confirm_window < 1:
            raise ValueError("confirm_window must be >= 1")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class TrackState:
    """Probation bookkeeping for one identity."""

    identity: int
    status: str
    first_seen: int
    last_matched: int
    consecutive_count: int = 1
    inclusion_frame: int | None = None
    window_deadline: int | None = None
    provisional_keys: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class Assignment:
    """Outcome for one observation of one frame."""

    obs_index: int
    det_key: str | None
    identity: int | None
    status: str
    support: int
    mean_d1: float | None
    fallback: bool = False


@dataclass(frozen=True)
class FrameResult:
    """Complete ledger of one processed frame."""

    frame: int
    assignments: tuple[Assignment, ...]
    new_ids: tuple[int, ...]
    confirmed_ids: tuple[int, ...]
    discarded_ids: tuple[int, ...]
    decays: tuple[tuple[int, float], ...]
    removed_keys: tuple[int, ...]
    rolled_back_keys: tuple[int, ...]
    evicted_keys: tuple[int, ...]
    memory_size: int


def resolve_ambiguity(groups: MatchGroups, store: MemoryStore
                      ) -> dict[int, tuple[int, list[MatchRecord]]]:
    """Pick one identity per observation by supporter count.

    When an observation is claimed by exemplars of several identities, the
    identity with the most supporting records wins; ties go to the smaller
    mean nearest distance, then the smaller identity number. Records backing
    losing identities are dropped (their items count as unmatched this
    frame).
    """
    winners: dict[int, tuple[int, list[MatchRecord]]] = {}
    ident_of = store.identity_of
    for obs_index in sorted(groups):
        by_ident: dict[int, list[MatchRecord]] = {}
        for rec in groups[obs_index]:
            by_ident.setdefault(ident_of(rec.item_key), []).append(rec)
        best = min(
            by_ident.items(),
            key=lambda kv: (-len(kv[1]),
                            sum(r.d1 for r in kv[1]) / len(kv[1]),
                            kv[0]),
        )
        winners[obs_index] = (best[0], best[1])
    return winners


def enforce_uniqueness(assignments: dict[int, tuple[int, list[MatchRecord]]]
                       ) -> dict[int, tuple[int, list[MatchRecord]]]:
    """Keep at most one observation per identity in a frame.

    When several observations won the same identity, the one with more
    supporting records keeps it (ties: smaller mean nearest distance, then
    smaller observation index); the rest become unassigned.
    """
    by_ident: dict[int, list[int]] = {}
    for obs_index, (ident, _) in assignments.items():
        by_ident.setdefault(ident, []).append(obs_index)
    kept: dict[int, tuple[int, list[MatchRecord]]] = {}
    for ident, obs_indices in by_ident.items():
        if len(obs_indices) == 1:
            kept[obs_indices[0]] = assignments[obs_indices[0]]
            continue
        def rank(obs_index: int):
            records = assignments[obs_index][1]
            mean_d1 = sum(r.d1 for r in records) / len(records)
            return (-len(records), mean_d1, obs_index)
        keeper = min(obs_indices, key=rank)
        kept[keeper] = assignments[keeper]
    return dict(sorted(kept.items()))


class IdentityEngine:
    """Stateful stream processor; frames must arrive in increasing order."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.store = MemoryStore(config.dimension, config.capacity,
                                 e_bar=config.e_bar,
                                 normalize=config.normalize)
        self.tracks: dict[int, TrackState] = {}
        self.last_frame: int | None = None

    def process_frame(self, observations: list[Observation],
                      frame_index: int) -> FrameResult:
        """Run the full per-frame pipeline and return its ledger."""
        cfg = self.config
        if self.last_frame is not None and frame_index <= self.last_frame:
            raise SequencingError(
                f"frame {frame_index} after frame {self.last_frame}")
        obs = self._validated(observations)
        bootstrap = len(self.store) == 0

        groups = renn_match(self.store, obs, cfg.rho_bar, cfg.alpha,
                            cfg.tau_abs)
        winners = resolve_ambiguity(groups, self.store)
        final = enforce_uniqueness(winners)

        removed: list[int] = []
        matched_keys: set[int] = set()
        inserted_keys: set[int] = set()
        # Decay all winners before any insertion: an insert at capacity
        # evicts, and must never evict an item still awaiting its decay.
        decays = [(r.item_key, r.eta)
                  for obs_index in sorted(final)
                  for r in final[obs_index][1]]
        removed.extend(self.store.decay_and_touch(decays))
        matched_keys.update(k for k, _ in decays)
        for obs_index in sorted(final):
            ident = final[obs_index][0]
            key = self.store.insert(obs[obs_index].descriptor, ident)
            inserted_keys.add(key)
            track = self.tracks[ident]
            if track.status != CONFIRMED:
                track.provisional_keys.append(key)
            if track.last_matched == frame_index - 1:
                track.consecutive_count += 1
            else:
                track.consecutive_count = 1
            track.last_matched = frame_index

        confirmed, discarded, rolled_back = self._advance_lifecycle(frame_index)

        new_ids = self._enrol(obs, final, frame_index, bootstrap,
                              inserted_keys)

        self.store.age_unmatched(matched_keys | inserted_keys)
        removed.extend(self.store.sweep())
        self.store.evict_overflow()
        evicted = self.store.drain_eviction_log()  # includes insert-time evictions

        result = FrameResult(
            frame=frame_index,
            assignments=self._assignment_rows(obs, final, new_ids),
            new_ids=tuple(new_ids),
            confirmed_ids=tuple(confirmed),
            discarded_ids=tuple(discarded),
            decays=tuple(decays),
            removed_keys=tuple(removed),
            rolled_back_keys=tuple(rolled_back),
            evicted_keys=tuple(evicted),
            memory_size=len(self.store),
        )
        for ident in discarded:
            del self.tracks[ident]
        self.last_frame = frame_index
        return result

    # -- pipeline stages ----------------------------------------------------

    def _validated(self, observations: list[Observation]) -> list[Observation]:
        cfg = self.config
        out = []
        for i, o in enumerate(observations):
            desc = o.descriptor
            if desc.shape != (cfg.dimension,):
                raise DescriptorError(
                    f"observation {i} has shape {desc.shape}, "
                    f"expected ({cfg.dimension},)")
            if cfg.normalize:
                desc = unit_normalize(desc)
            out.append(o._replace(obs_index=i, descriptor=desc))
        return out

    def _advance_lifecycle(self, frame_index: int):
        cfg = self.config
        confirmed: list[int] = []
        discarded: list[int] = []
        rolled_back: list[int] = []
        for ident in sorted(self.tracks):
            track = self.tracks[ident]
            if (track.status == CANDIDATE
                    and track.consecutive_count >= cfg.confirm_consecutive):
                track.status = TENTATIVE
                track.inclusion_frame = frame_index
                track.window_deadline = frame_index + cfg.confirm_window
            elif track.status == TENTATIVE:
                if (track.last_matched > track.inclusion_frame
                        and track.last_matched <= track.window_deadline):
                    track.status = CONFIRMED
                    track.provisional_keys.clear()
                    confirmed.append(ident)
                elif frame_index > track.window_deadline:
                    track.status = DISCARDED
                    rolled_back.extend(
                        self.store.remove_keys(track.provisional_keys))
                    discarded.append(ident)
        return confirmed, discarded, rolled_back

    def _enrol(self, obs, final, frame_index, bootstrap, inserted_keys):
        """Enrol unmatched observations as new candidate identities.

        Gated on at least one established (tentative or confirmed) identity
        having won an assignment this frame; an empty memory bootstraps by
        enrolling everything.
        """
        leftovers = [i for i in range(len(obs)) if i not in final]
        if not leftovers:
            return []
        if self.config.novelty_gate and not bootstrap:
            recognized = any(
                t.status in (TENTATIVE, CONFIRMED)
                and t.last_matched == frame_index
                for t in self.tracks.values())
            if not recognized:
                return []
        new_ids = []
        for i in leftovers:
            ident = self.store.next_id
            key = self.store.insert(obs[i].descriptor, ident)
            inserted_keys.add(key)
            self.tracks[ident] = TrackState(
                identity=ident, status=CANDIDATE, first_seen=frame_index,
                last_matched=frame_index, consecutive_count=1,
                provisional_keys=[key])
            new_ids.append(ident)
        return new_ids

    def _assignment_rows(self, obs, final, new_ids):
        enrolled = dict(zip(
            (i for i in range(len(obs)) if i not in final), new_ids))
        rows = []
        for i, o in enumerate(obs):
            if i in final:
                ident, records = final[i]
                rows.append(Assignment(
                    obs_index=i, det_key=o.det_key, identity=ident,
                    status=self._status_of(ident),
                    support=len(records),
                    mean_d1=sum(r.d1 for r in records) / len(records),
                    fallback=any(r.fallback for r in records)))
            elif i in enrolled:
                rows.append(Assignment(
                    obs_index=i, det_key=o.det_key, identity=enrolled[i],
                    status=CANDIDATE, support=0, mean_d1=None))
            else:
                rows.append(Assignment(
                    obs_index=i, det_key=o.det_key, identity=None,
                    status=UNASSIGNED, support=0, mean_d1=None))
        return tuple(rows)

    def _status_of(self, ident: int) -> str:
        track = self.tracks.get(ident)
        return track.status if track is not None else DISCARDED
