"""cgnscope: carrier-grade NAT detection and characterization toolkit.

Three detection methods (DHT peer-leakage clustering, session address
heuristics, active probing) plus a deterministic NAT444 network simulator
that serves as the ground-truth oracle for all of them.
"""

__version__ = "0.1.0"
