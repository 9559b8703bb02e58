"""Array-level binding onto the agmn inference engine.

Two functions cross the boundary: infer_arrays runs structured inference on
plain numpy arrays, make_targets_arrays synthesizes training-target stacks
from a keypoint list. Data is copied in and copied out; the engine never
holds a reference to caller memory and callers never see engine internals.
"""

from agmn import __version__ as __version__

from .binding import infer_arrays, make_targets_arrays

__all__ = ["__version__", "infer_arrays", "make_targets_arrays"]
