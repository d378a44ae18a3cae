"""Counter-based random streams.

Every source of randomness in the package is a Philox stream keyed by
(seed, stream id, substream index).  Streams are independent of each other
and of how many were drawn before, so trials can run in any order or in
parallel and still reproduce bit-for-bit.
"""

import numpy as np

# Stream ids.  Keep these stable: they are part of the reproducibility
# contract (recorded seeds only make sense together with the stream layout).
SIGNALS = 0
SCHEDULE = 1
GRAPH = 2
EXPERIMENT = 3

_MASK64 = (1 << 64) - 1


def stream(seed, stream_id, index=0):
    """Return a ``numpy.random.Generator`` for the given (seed, stream, index).

    ``index`` is typically a trial number; each (stream_id, index) pair maps
    to a distinct Philox key.
    """
    key = np.array(
        [int(seed) & _MASK64, ((int(stream_id) << 48) ^ int(index)) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))
