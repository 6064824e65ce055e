"""Full-batch projected gradient descent shared by every fitted calibrator."""
from __future__ import annotations

import math

import numpy as np

from .errors import OptimizationError


def descend(fun, x0, learning_rate=0.01, max_iter=2000, tol=1e-9, project=None):
    """Minimize ``fun`` starting from ``x0``.

    ``fun(x)`` returns ``(loss, grad)``. Each iteration tries a step of the
    current size and halves it until the loss does not increase, so the
    recorded loss sequence is non-increasing. After an accepted step the size
    doubles again, capped at ``learning_rate``. Stops when an accepted step
    lowers the loss by less than ``tol`` or after ``max_iter`` iterations.

    Returns
    -------
    x : ndarray
    history : list of float
        Loss at ``x0`` followed by the loss after every accepted step.
    """
    x = np.array(x0, dtype=np.float64)
    if project is not None:
        x = project(x)
    loss, grad = fun(x)
    if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise OptimizationError("non-finite loss or gradient", 0)
    history = [loss]
    step = learning_rate
    min_step = learning_rate * 2.0 ** -60
    for it in range(1, max_iter + 1):
        while True:
            x_new = x - step * grad
            if project is not None:
                x_new = project(x_new)
            loss_new, grad_new = fun(x_new)
            if not math.isfinite(loss_new) or not np.all(np.isfinite(grad_new)):
                raise OptimizationError("non-finite loss or gradient", it)
            if loss_new <= loss:
                break
            step *= 0.5
            if step < min_step:
                return x, history
        decrease = loss - loss_new
        x, loss, grad = x_new, loss_new, grad_new
        history.append(loss)
        if decrease < tol:
            break
        step = min(learning_rate, 2.0 * step)
    return x, history


def finite_difference_gradient(fun, x, step=1e-5):
    """Central-difference gradient of a scalar function ``fun(x) -> float``."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += step
        xm.flat[i] -= step
        g.flat[i] = (fun(xp) - fun(xm)) / (2 * step)
    return g
