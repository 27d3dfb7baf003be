"""Dense f64 tensors: thin helpers over numpy with checked construction."""

import numpy as np


class TensorError(ValueError):
    """Raised when a tensor violates its construction contract."""


def make_tensor(data, shape=None, checked=True) -> np.ndarray:
    """Build a row-major float64 array, validating shape and finiteness.

    `data` may be a flat sequence (with an explicit `shape`) or anything
    numpy can coerce. In checked mode NaN/Inf entries are rejected.
    """
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(d) for d in shape)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise TensorError(
                f"data length {arr.size} does not match shape {shape}"
            )
        arr = arr.reshape(shape)
    arr = np.ascontiguousarray(arr)
    if checked and not np.all(np.isfinite(arr)):
        raise TensorError("tensor contains non-finite entries")
    return arr


def check_finite(arr: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise TensorError(f"{what} contains non-finite entries")
    return arr
