"""Backend selection for the lattice kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback.  ``use_backend`` switches explicitly (tests and benchmarks run
both).
"""

from contextlib import contextmanager

from . import _pykernels

try:
    from . import _kernels as _native
except ImportError:  # extension not built
    _native = None

BACKENDS = {"python": _pykernels}
if _native is not None:
    BACKENDS["native"] = _native

_active = "native" if _native is not None else "python"


def available_backends():
    return sorted(BACKENDS)


def backend_name():
    return _active


def use_backend(name):
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    _active = name


@contextmanager
def backend(name):
    prev = _active
    use_backend(name)
    try:
        yield
    finally:
        use_backend(prev)


def ctl_lattice(log_eps, log_delta, max_block, want_grad=True):
    return BACKENDS[_active].ctl_lattice(log_eps, log_delta, max_block, want_grad)


def ctc_lattice(log_q, labels, want_grad=True):
    return BACKENDS[_active].ctc_lattice(log_q, labels, want_grad)
