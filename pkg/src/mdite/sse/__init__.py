"""Extended-ensemble stochastic series expansion sampler.

The generalized partition function of the measurement-dressed protocol
is sampled on a per-site imaginary-time circle of circumference
``n_layers * tau``: each layer contributes its ket and bra half (two
strings of length tau/2 each), and measurement boundary ``l`` touches
the circle at the two junctions ``l`` and ``2*n_layers - l``.  A
measured (site, boundary) pins those junctions to a shared spin value
and joins the clusters passing through them; an unmeasured one leaves
the worldlines untouched.  Auxiliary identity vertices at every junction
let cluster and loop updates travel across layers.
"""

from .engine import SampleSeries, SseSampler, run_chain
from .state import SseState, init_state

__all__ = ["SseState", "init_state", "SseSampler", "SampleSeries", "run_chain"]
