"""Deterministic random-stream derivation.

Every consumer of randomness gets its own named substream derived from
(master seed, replication index, node id, purpose), so adding one traffic
source can never perturb another node's beacon timing. Streams are numpy
PCG64 generators keyed through SeedSequence spawn keys, which makes the
derivation reproducible across platforms and auditable from the config.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "beacon": 0,    # inter-beacon times
    "traffic": 1,   # inter-update times
    "channel": 2,   # per-receiver delivery trials for this sender
    "backoff": 3,   # flooding worker backoffs
    "walk": 4,      # Monte-Carlo chain walks
}


def stream(master_seed: int, replication: int, node_id: int, purpose: str):
    """One independent generator per (seed, replication, node, purpose)."""
    seq = np.random.SeedSequence(
        master_seed, spawn_key=(replication, node_id, PURPOSES[purpose])
    )
    return np.random.Generator(np.random.PCG64(seq))
