"""Percentile-reachability cartography for doubly-weighted MDPs."""
from .kernels import KERNEL_BACKEND
from .model import W1, W2, MdpError, MdpFormatError, WeightedMdp, load_mdp, parse_mdp, serialize_mdp, validate

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "MdpError",
    "MdpFormatError",
    "W1",
    "W2",
    "WeightedMdp",
    "load_mdp",
    "parse_mdp",
    "serialize_mdp",
    "validate",
]
