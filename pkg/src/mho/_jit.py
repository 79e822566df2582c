"""Optional numba acceleration.

Hot numerical kernels are decorated with ``njit``.  When numba is not
installed the decorator degrades to an identity wrapper, so every kernel
also runs as plain Python (slower, same arithmetic).
"""

try:
    from numba import njit  # type: ignore

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba

    def njit(*args, **kwargs):  # type: ignore
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    NUMBA_AVAILABLE = False
