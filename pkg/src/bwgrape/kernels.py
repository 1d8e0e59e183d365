"""Backend selection for the hot kernels.

The compiled extension is used when it was built and imports cleanly; set
``BWGRAPE_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from bwgrape import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("BWGRAPE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from bwgrape import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def causal_convolve(h, u):
    # numpy's convolution outruns a compiled loop here, so both backends share it
    return _pykernels.causal_convolve(h, u)


def propagator_chains(steps, u_desired):
    if steps.shape[1] == 0:
        raise ValueError("need at least one step propagator")
    return _impl.propagator_chains(steps, u_desired)


def period_gradients(forward, backward, controls, tau):
    return _impl.period_gradients(forward, backward, controls, float(tau))
