"""Central-finite-difference verification of tape gradients."""

import numpy as np

from ..errors import ShapeError
from .tensor import GradTape, Tensor


def grad_check(f, store, eps=1e-5, max_coords_per_param=8, seed=0, param_names=None):
    """Max relative error between tape gradients and central differences.

    ``f`` is a deterministic zero-argument callable returning a scalar
    [1,1,1,1] Tensor built from parameters in ``store``.  For each parameter
    (optionally restricted to ``param_names``) up to ``max_coords_per_param``
    coordinates are sampled; each is perturbed by +-eps and the analytic
    gradient is compared against (f+ - f-) / (2 eps) using
    |a - cd| / max(|a|, |cd|, 1e-8).
    """
    if eps <= 0:
        raise ShapeError(f"grad_check: eps must be positive, got {eps}")
    with GradTape() as tape:
        loss = f()
    if not isinstance(loss, Tensor) or loss.shape != (1, 1, 1, 1):
        raise ShapeError("grad_check: f must produce a scalar [1,1,1,1] tensor")
    store.zero_grads()
    tape.backward(loss)
    analytic = {p.name: p.grad.copy() for p in store}

    rng = np.random.default_rng(seed)
    if param_names is None:
        params = list(store)
    else:
        params = [store.get(n) for n in param_names]

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        size = flat.size
        if size <= max_coords_per_param:
            idxs = np.arange(size)
        else:
            idxs = np.sort(rng.choice(size, size=max_coords_per_param, replace=False))
        a_flat = analytic[p.name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            lp = f().item()
            flat[i] = orig - eps
            lm = f().item()
            flat[i] = orig
            cd = (lp - lm) / (2.0 * eps)
            a = float(a_flat[i])
            rel = abs(a - cd) / max(abs(a), abs(cd), 1e-8)
            worst = max(worst, rel)
    return worst
