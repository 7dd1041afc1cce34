"""Pure-numpy statevector kernels.

Fallback implementation of the hot inner loops; the compiled module in
``_kernels_cy`` has the same signatures.  All functions mutate ``state``
(a 1-D complex128 array of length 2**n) in place.  Qubit q corresponds to
bit q of the basis-state index (qubit 0 least significant).
"""

import numpy as np

BACKEND = "python"

_HAS_BITCOUNT = hasattr(np, "bitwise_count")


def _parity(v: np.ndarray) -> np.ndarray:
    """Parity of the set bits of each entry (uint64 array in, 0/1 out)."""
    if _HAS_BITCOUNT:
        return (np.bitwise_count(v) & 1).astype(np.int8)
    v = v.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return (v & 1).astype(np.int8)


def apply_1q(state: np.ndarray, q: int, m: np.ndarray) -> None:
    """Apply a 2x2 matrix m to qubit q."""
    dim = state.shape[0]
    view = state.reshape(dim >> (q + 1), 2, 1 << q)
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = m[0, 0] * a + m[0, 1] * b
    view[:, 1, :] = m[1, 0] * a + m[1, 1] * b


def apply_cnot_layer(state: np.ndarray, controls: np.ndarray, targets: np.ndarray) -> None:
    """Apply a layer of disjoint CNOTs given parallel control/target arrays."""
    dim = state.shape[0]
    idx = np.arange(dim, dtype=np.uint64)
    flip = np.zeros(dim, dtype=np.uint64)
    for c, t in zip(controls, targets):
        flip ^= ((idx >> np.uint64(c)) & np.uint64(1)) << np.uint64(t)
    # A CNOT layer is an involutive basis permutation.
    state[:] = state[idx ^ flip]


def apply_pauli(state: np.ndarray, x_mask: int, z_mask: int) -> None:
    """Apply X^x_mask Z^z_mask (phase dropped; it is global)."""
    dim = state.shape[0]
    idx = np.arange(dim, dtype=np.uint64)
    perm = idx ^ np.uint64(x_mask)
    if z_mask:
        signs = 1.0 - 2.0 * _parity(idx & np.uint64(z_mask))
        if x_mask:
            state[:] = state[perm] * signs[perm.astype(np.intp)]
        else:
            state *= signs
    elif x_mask:
        state[:] = state[perm]
