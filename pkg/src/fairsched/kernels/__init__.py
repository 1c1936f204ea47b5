"""Hot numeric kernels with a compiled fast path.

Training spends nearly all of its time evaluating the logistic loss and
gradient, so that pass is implemented twice: a Cython extension
(``_native``, built by setup.py) and a pure-numpy fallback (``_fallback``).
The extension is preferred when importable; set FAIRSCHED_PURE_PYTHON=1 to
force the fallback. ``BACKEND`` names whichever implementation is active.

Both implementations satisfy the same contract:

    logistic_loss_grad(X, y, w, intercept, l2, sample_weight=None)
        -> (loss, grad)

where ``X`` is an (n, d) float64 matrix, ``y`` holds 0/1 labels, ``grad``
has d+1 entries with the intercept component last, the loss is the
weighted mean negative log-likelihood plus ``0.5 * l2 * ||w||^2``, and the
intercept is never penalized.
"""

import os

if os.environ.get("FAIRSCHED_PURE_PYTHON"):
    from fairsched.kernels import _fallback as _impl
else:
    try:
        from fairsched.kernels import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        from fairsched.kernels import _fallback as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND
logistic_loss_grad = _impl.logistic_loss_grad

__all__ = ["BACKEND", "logistic_loss_grad"]
