"""Online identity learning over descriptor streams.

The package assigns open-world identities to per-frame detection
descriptors by reverse nearest-neighbour ratio matching against a bounded
exemplar memory, forgets redundant exemplars through multiplicative
eligibility decay, and evicts stale ones on overflow. It ships the matching
kernel, the per-frame engine, tracking metrics, stream formats with a
synthetic generator, a scalar convergence simulator, and a CLI.
"""

from .engine import (Assignment, EngineConfig, FrameResult, IdentityEngine,
                     TrackState, compute_eta, enforce_uniqueness,
                     resolve_ambiguity)
from .errors import (ConfigError, ContractionViolationError, DescriptorError,
                     MetricUndefinedError, RennTrackError, SequencingError,
                     StreamFormatError)
from .matching import (MatchGroups, MatchRecord, Observation,
                       pairwise_distances, renn_match,
                       unmatched_observations)
from .memory import MemoryItem, MemoryStats, MemoryStore
from .metrics import (EvalCounts, EvalReport, PurityReport, correspond,
                      evaluate_frames, id_switches, iou, mota, motp,
                      weighted_purity)
from .stability import (StabilityConfig, StabilityResult, run_stability_suite,
                        stability_sim)
from .streams import (Detection, FrameRecord, SynthConfig, read_results,
                      read_stream, rotating_schedule, synth_stream,
                      write_results, write_stream)

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ConfigError", "ContractionViolationError", "Detection",
    "DescriptorError", "EngineConfig", "EvalCounts", "EvalReport",
    "FrameRecord", "FrameResult", "IdentityEngine", "MatchGroups",
    "MatchRecord", "MemoryItem", "MemoryStats", "MemoryStore",
    "MetricUndefinedError", "Observation", "PurityReport", "RennTrackError",
    "SequencingError", "StabilityConfig", "StabilityResult",
    "StreamFormatError", "SynthConfig", "TrackState", "compute_eta",
    "correspond", "enforce_uniqueness", "evaluate_frames", "id_switches",
    "iou", "mota", "motp", "pairwise_distances", "read_results",
    "read_stream", "renn_match", "resolve_ambiguity", "rotating_schedule",
    "run_stability_suite", "stability_sim", "synth_stream",
    "unmatched_observations", "weighted_purity", "write_results",
    "write_stream",
]
