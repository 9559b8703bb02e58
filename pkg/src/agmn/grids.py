"""Dense 2D grid primitives and bit-exact tensor file I/O.

Everything downstream (messages, score maps, kernels) is built from two value
types defined here: a single double-precision plane (Grid2D) and a stack of
same-shape planes (TensorStack). Both wrap read-only float64 arrays, so every
operation in this module is a pure function and instances can be shared freely
across threads.

The convolution implemented by conv2d_same is TRUE convolution: a kernel whose
only nonzero entry sits at offset (dy, dx) from the kernel center shifts the
input by exactly (+dy, +dx). Libraries that provide cross-correlation need a
flipped kernel to match this; here the definition is kept explicit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    FormatError,
    InvalidKernelError,
    InvalidPotentialError,
    NonFiniteError,
    ShapeMismatchError,
)

# Sums at or below this are treated as all-zero by normalize_sum.
EPS_FLOOR = 1e-12


def _freeze(arr: np.ndarray) -> np.ndarray:
    """Return a C-contiguous float64 array the caller cannot mutate us through."""
    out = np.asarray(arr, dtype=np.float64)
    if not out.flags.c_contiguous:
        out = np.ascontiguousarray(out)
    if out.flags.writeable:
        if out is arr:
            out = out.copy()
        out.setflags(write=False)
    return out


class GridIndex(NamedTuple):
    """A (row, col) cell location inside a grid."""

    row: int
    col: int


@dataclass(frozen=True, eq=False)
class Grid2D:
    """A dense row-major real matrix holding scores, kernels, or messages."""

    data: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatchError(f"grid must be 2D and nonempty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError("grid contains NaN or Inf")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class TensorStack:
    """An ordered stack of same-shape planes (channels x rows x cols)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeMismatchError(f"stack must be 3D and nonempty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError("stack contains NaN or Inf")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def plane_shape(self) -> tuple[int, int]:
        return self.data.shape[1:]

    def channel(self, i: int) -> Grid2D:
        # Read-only view; Grid2D shares it without copying.
        return Grid2D(self.data[i])


def stack_grids(grids: Sequence[Grid2D]) -> TensorStack:
    """Stack same-shape grids into a TensorStack, channel order preserved."""
    if not grids:
        raise ShapeMismatchError("cannot stack an empty list of grids")
    shapes = {g.shape for g in grids}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"grids disagree on shape: {sorted(shapes)}")
    return TensorStack(np.stack([g.data for g in grids]))


def _check_kernel(k: Grid2D) -> tuple[int, int]:
    kr, kc = k.shape
    if kr % 2 == 0 or kc % 2 == 0:
        raise InvalidKernelError(f"kernel sides must be odd, got {kr}x{kc}")
    return kr // 2, kc // 2


def _conv_direct(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    hr, hc = h.shape
    kr, kc = k.shape
    cr, cc = kr // 2, kc // 2
    padded = np.zeros((hr + kr - 1, hc + kc - 1))
    padded[cr:cr + hr, cc:cc + hc] = h
    # Reversing the window axes pairs kernel entries in row-major order with
    # h[y-dy, x-dx], which is the summation the contract states. optimize=False
    # keeps the contraction a single deterministic C loop (no BLAS dispatch).
    win = sliding_window_view(padded, (kr, kc))[:, :, ::-1, ::-1]
    return np.einsum("yxrc,rc->yx", win, k, optimize=False)


def _conv_fft(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    hr, hc = h.shape
    kr, kc = k.shape
    cr, cc = kr // 2, kc // 2
    fr, fc = hr + kr - 1, hc + kc - 1
    prod = np.fft.rfft2(h, s=(fr, fc)) * np.fft.rfft2(k, s=(fr, fc))
    full = np.fft.irfft2(prod, s=(fr, fc))
    return full[cr:cr + hr, cc:cc + hc]


def conv2d_same(h: Grid2D, k: Grid2D, path: str = "direct") -> Grid2D:
    """Convolve h with an odd-sized kernel k, output shaped like h.

    out[y][x] = sum over (dy, dx) of h[y-dy][x-dx] * k[cr+dy][cc+dx], with h
    zero-padded by half the kernel on each side. An impulse at center offset
    (dy, dx) therefore shifts h by exactly (+dy, +dx).

    path selects the compute route: "direct" is the bitwise-deterministic
    spatial reference, "fft" a faster frequency-domain route that matches
    direct to roundoff (an optimization, never a semantic change).
    """
    _check_kernel(k)
    if path == "direct":
        return Grid2D(_conv_direct(h.data, k.data))
    if path == "fft":
        return Grid2D(_conv_fft(h.data, k.data))
    raise ValueError(f"unknown conv path {path!r}, expected 'direct' or 'fft'")


def reflect180(k: Grid2D) -> Grid2D:
    """Point reflection through the grid center: out[r][c] = k[R-1-r][C-1-c]."""
    return Grid2D(k.data[::-1, ::-1])


def normalize_sum(g: Grid2D) -> Grid2D:
    """Scale a nonnegative grid to sum 1; an (effectively) all-zero grid
    becomes uniform, the non-informative fallback."""
    if (g.data < 0).any():
        raise InvalidPotentialError("normalize_sum requires nonnegative entries")
    total = float(g.data.sum())
    if total > EPS_FLOOR:
        return Grid2D(g.data / total)
    return Grid2D(np.full(g.shape, 1.0 / (g.rows * g.cols)))


def hadamard(gs: Sequence[Grid2D]) -> Grid2D:
    """Elementwise product of one or more same-shape grids."""
    if not gs:
        raise ShapeMismatchError("hadamard needs at least one grid")
    first = gs[0]
    out = first.data
    for g in gs[1:]:
        if g.shape != first.shape:
            raise ShapeMismatchError(f"shape mismatch: {first.shape} vs {g.shape}")
        out = out * g.data
    return Grid2D(out)


def argmax_cell(g: Grid2D) -> GridIndex:
    """Location of the maximum; ties go to the smallest row-major index."""
    flat = int(np.argmax(g.data))
    return GridIndex(*divmod(flat, g.cols))


# ---------------------------------------------------------------------------
# AGT1 tensor file format.
#
# bytes 0-3   magic "AGT1"
# byte  4     dtype: 1 = f32 LE, 2 = f64 LE
# byte  5     ndim: 2 or 3
# bytes 6-7   reserved, must be zero
# then        ndim x u32 LE dims (channels, rows, cols; channels omitted
#             when ndim == 2)
# then        payload, channel-major then row-major
# ---------------------------------------------------------------------------

_MAGIC = b"AGT1"
_DTYPE_CODES = {"f32": 1, "f64": 2}
_DTYPE_NP = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_MAX_PAYLOAD_BYTES = 1 << 48  # guard against absurd dim products


def write_tensor(stack: TensorStack, path, dtype: str = "f64") -> None:
    """Write a stack as an AGT1 file. dtype is "f32" or "f64"; f64 round-trips
    bitwise, f32 round-trips at its own precision."""
    if dtype not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype {dtype!r}, expected 'f32' or 'f64'")
    code = _DTYPE_CODES[dtype]
    ch, rows, cols = stack.data.shape
    for name, dim in (("channels", ch), ("rows", rows), ("cols", cols)):
        if dim > 0xFFFFFFFF:
            raise FormatError(f"{name}={dim} overflows the u32 dim field at byte 8")
    header = _MAGIC + struct.pack("<BBBB", code, 3, 0, 0) + struct.pack("<III", ch, rows, cols)
    payload = np.ascontiguousarray(stack.data, dtype=_DTYPE_NP[code]).tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_tensor(path) -> TensorStack:
    """Read an AGT1 file; f32 payloads widen to f64. A 2D file becomes a
    single-channel stack. Malformed files raise FormatError naming the byte
    offset of the problem."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 8:
        raise FormatError(f"truncated header at byte {len(buf)} (need 8 bytes)")
    if buf[:4] != _MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r} at byte 0")
    code, ndim, r0, r1 = struct.unpack_from("<BBBB", buf, 4)
    if code not in _DTYPE_NP:
        raise FormatError(f"unknown dtype code {code} at byte 4")
    if ndim not in (2, 3):
        raise FormatError(f"unsupported ndim {ndim} at byte 5")
    if r0 != 0 or r1 != 0:
        raise FormatError("reserved bytes not zero at byte 6")
    dims_end = 8 + 4 * ndim
    if len(buf) < dims_end:
        raise FormatError(f"truncated dims at byte {len(buf)} (need {dims_end} bytes)")
    dims = struct.unpack_from(f"<{ndim}I", buf, 8)
    if any(d == 0 for d in dims):
        raise FormatError(f"zero dimension {dims} at byte 8")
    shape = (1, *dims) if ndim == 2 else tuple(dims)
    np_dtype = _DTYPE_NP[code]
    n_elem = shape[0] * shape[1] * shape[2]
    n_bytes = n_elem * np_dtype.itemsize
    if n_bytes > _MAX_PAYLOAD_BYTES:
        raise FormatError(f"dimension overflow: {dims} payload too large at byte 8")
    expected_end = dims_end + n_bytes
    if len(buf) < expected_end:
        raise FormatError(
            f"truncated payload at byte {len(buf)} (expected {expected_end} bytes)"
        )
    if len(buf) > expected_end:
        raise FormatError(f"trailing data at byte {expected_end}")
    raw = np.frombuffer(buf, dtype=np_dtype, count=n_elem, offset=dims_end)
    return TensorStack(raw.astype(np.float64).reshape(shape))
