"""Central finite-difference gradient verification."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from .tensor import Tensor, backward, no_grad


def grad_check(
    f: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    floor: float = 1e-6,
    retry_steps: tuple[float, ...] = (1e-4, 1e-3, 1e-2),
) -> dict[str, float]:
    """Compare analytic gradients of scalar f() against central differences.

    Returns the max error per parameter, where the per-entry error is
    |analytic - numeric| / max(|analytic|, |numeric|, floor): relative for
    entries that matter, absolute against `floor` for near-zero ones.
    Central differences are noise-limited around eps*|f|/h, so a partial
    derivative tiny relative to |f| cannot be certified to a purely
    relative tolerance by any step size; the floor is the documented
    absolute tolerance for that regime.

    An entry whose error at step `h` exceeds `tolerance` is re-measured at
    the coarser `retry_steps` and keeps its best agreement: rounding noise
    shrinks with a larger step while a genuinely wrong adjoint stays wrong
    at every step. Parameters must be float64 for these steps to be
    meaningful.
    """
    for p in params.values():
        p.grad = None
    loss = f()
    backward(loss)
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}

    def fd(flat: np.ndarray, idx: int, step: float) -> float:
        orig = flat[idx]
        with no_grad():
            flat[idx] = orig + step
            fp = float(f().data)
            flat[idx] = orig - step
            fm = float(f().data)
        flat[idx] = orig
        return (fp - fm) / (2.0 * step)

    def err_of(a: float, n: float) -> float:
        return abs(a - n) / max(abs(a), abs(n), floor)

    report: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        aflat = analytic[name].reshape(-1)
        worst = 0.0
        for idx in range(flat.size):
            a = aflat[idx]
            err = err_of(a, fd(flat, idx, h))
            if err >= tolerance:
                for step in retry_steps:
                    err = min(err, err_of(a, fd(flat, idx, step)))
                    if err < tolerance:
                        break
            if err > worst:
                worst = err
        report[name] = worst
    return report
