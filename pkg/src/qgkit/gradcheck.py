"""Central finite-difference gradient estimation.

The estimator only ever calls the supplied forward function, so it is
independent of every backward rule it is used to check.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .autodiff import Tensor

__all__ = ["central_difference", "relative_error", "check_gradients"]


def central_difference(
    f: Callable[[], float],
    tensor: Tensor,
    h: float = 1e-4,
    coords: Iterable[int] | None = None,
) -> np.ndarray:
    """Estimate d f / d tensor by central differences.

    ``f`` must re-evaluate the forward pass from the tensor's current
    values.  ``coords`` restricts the estimate to the given flat
    coordinates (others are returned as NaN); by default every
    coordinate is probed.
    """
    flat = tensor.data.ravel()
    if coords is None:
        coords = range(flat.shape[0])
        grad = np.empty(flat.shape[0], dtype=np.float64)
    else:
        coords = list(coords)
        grad = np.full(flat.shape[0], np.nan, dtype=np.float64)
    for i in coords:
        saved = flat[i]
        flat[i] = saved + h
        f_plus = f()
        flat[i] = saved - h
        f_minus = f()
        flat[i] = saved
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad.reshape(tensor.data.shape)


def relative_error(analytic: np.ndarray, estimate: np.ndarray) -> float:
    """Worst absolute deviation scaled by the largest gradient magnitude.

    When both gradients sit below the finite-difference noise floor the
    ratio is meaningless, so the raw absolute deviation is returned
    instead (an identically-zero gradient then compares as zero rather
    than as amplified rounding noise)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(estimate, dtype=np.float64).ravel()
    mask = ~np.isnan(b)
    if not mask.any():
        return 0.0
    diff = np.max(np.abs(a[mask] - b[mask]))
    scale = max(np.max(np.abs(a[mask])), np.max(np.abs(b[mask])))
    if scale < 1e-6:
        return float(diff)
    return float(diff / scale)


def check_gradients(
    f: Callable[[], float],
    tensors: Sequence[Tensor],
    h: float = 1e-4,
    coords_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest relative error between stored ``grad`` slots and finite
    differences, over the given tensors.

    When ``coords_per_tensor`` is set, only that many randomly chosen
    coordinates of each tensor are probed (always every coordinate for
    tensors at most that size); an rng is then required.
    """
    worst = 0.0
    for t in tensors:
        if t.grad is None:
            raise ValueError("tensor has no gradient; run backward first")
        size = t.data.size
        if coords_per_tensor is None or size <= coords_per_tensor:
            coords = None
        else:
            coords = rng.choice(size, size=coords_per_tensor, replace=False)
        est = central_difference(f, t, h=h, coords=coords)
        worst = max(worst, relative_error(t.grad, est))
    return worst
