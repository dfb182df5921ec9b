"""Layered control contracts.

Signal transducers with proper inverses, generalized labeled transition
systems, (alternating) simulation checking across alphabets, assume/guarantee
contract algebra, and a three-layer differential-drive case study with
runtime monitors.
"""

__version__ = "0.1.0"
