"""Kernel backend selection.

Imports the compiled Cython kernels when available, otherwise falls back to
the pure-numpy implementation.  Set CVARQ_KERNELS=python (or =cython) to
force a backend; forcing cython raises if the extension is missing.
"""

import os

_choice = os.environ.get("CVARQ_KERNELS", "").lower()

if _choice == "python":
    from cvarq import _kernels_py as _impl
elif _choice == "cython":
    from cvarq import _kernels_cy as _impl  # type: ignore[no-redef]
else:
    try:
        from cvarq import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        from cvarq import _kernels_py as _impl

BACKEND = _impl.BACKEND
apply_1q = _impl.apply_1q
apply_cnot_layer = _impl.apply_cnot_layer
apply_pauli = _impl.apply_pauli
