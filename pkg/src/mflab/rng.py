"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
(master seed, stream id) and whose counter encodes the step index.  A draw is
therefore a pure function of (seed, stream, step, position) and cannot depend
on execution order or worker count.
"""

import numpy as np

# Stream ids. Never reuse an id for a different purpose: that would couple
# draws that the contracts require to be independent.
STREAM_INIT = 1          # ensemble initialization
STREAM_NOISE = 2         # per-step Langevin noise
STREAM_DATA = 3          # dataset generation
STREAM_REFERENCE = 4     # fixed fresh-p0 reference sample for W2 tracking
STREAM_SLICE = 5         # sliced-W2 projection directions
STREAM_MC = 6            # Monte-Carlo audits and teacher sampling


def stream(seed: int, stream_id: int, step: int = 0) -> np.random.Generator:
    """Generator for (seed, stream_id, step); identical arguments give
    identical draw sequences."""
    bits = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    key = [bits, np.uint64(stream_id)]
    counter = [0, 0, np.uint64(step & 0xFFFFFFFFFFFFFFFF), 0]
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
