"""Pure-NumPy statevector kernels (fallback backend).

Same contract as the compiled extension entopt._kernels:

- states are 1-D C-contiguous complex128 arrays of length 2**n;
- qubit 0 is the least-significant bit of the basis index;
- two-qubit matrices are 4x4 in the basis index 2*bit_first + bit_second,
  where "first" is the first qubit in the gate's qubit list (the control
  for CX/CRX);
- apply_1q / apply_2q mutate the state in place.
"""
from __future__ import annotations

import numpy as np

_weights_cache: dict[int, np.ndarray] = {}


def apply_1q(state: np.ndarray, mat: np.ndarray, q: int) -> None:
    s = state.reshape(-1, 2, 1 << q)
    a = s[:, 0, :].copy()
    b = s[:, 1, :]
    s[:, 0, :] = mat[0, 0] * a + mat[0, 1] * b
    s[:, 1, :] = mat[1, 0] * a + mat[1, 1] * b


def apply_2q(state: np.ndarray, mat: np.ndarray, qa: int, qb: int) -> None:
    n = state.size.bit_length() - 1
    t = state.reshape([2] * n)
    view = np.moveaxis(t, (n - 1 - qa, n - 1 - qb), (0, 1))
    flat = view.reshape(4, -1)  # copies when the view is non-contiguous
    view[...] = (mat @ flat).reshape(view.shape)


def qubit_marginals(state: np.ndarray) -> np.ndarray:
    """Single-qubit reduced density matrices: (n, 2, 2) complex array."""
    n = state.size.bit_length() - 1
    out = np.empty((n, 2, 2), dtype=np.complex128)
    for q in range(n):
        s = state.reshape(-1, 2, 1 << q)
        a = s[:, 0, :]
        b = s[:, 1, :]
        p0 = float(np.real(np.vdot(a, a)))
        p1 = float(np.real(np.vdot(b, b)))
        c = complex(np.vdot(b, a))  # <0|rho|1> = sum psi_0 * conj(psi_1)
        out[q, 0, 0] = p0
        out[q, 0, 1] = c
        out[q, 1, 0] = c.conjugate()
        out[q, 1, 1] = p1
    return out


def zgen_weights(n: int) -> np.ndarray:
    """Diagonal of the collective generator G = sum_j Z_j / 2 over basis states."""
    w = _weights_cache.get(n)
    if w is None:
        idx = np.arange(1 << n, dtype=np.uint64)
        pop = np.zeros(1 << n, dtype=np.float64)
        for j in range(n):
            pop += (idx >> np.uint64(j)) & np.uint64(1)
        w = 0.5 * (n - 2.0 * pop)
        w.setflags(write=False)
        _weights_cache[n] = w
    return w


def zgen_moments(state: np.ndarray) -> tuple[float, float]:
    """(<G>, <G^2>) for the collective generator G = sum_j Z_j / 2."""
    n = state.size.bit_length() - 1
    w = zgen_weights(n)
    probs = np.abs(state) ** 2
    m1 = float(probs @ w)
    m2 = float(probs @ (w * w))
    return m1, m2
