"""Central finite-difference verification of analytic gradients."""

import numpy as np

from .nn import ParamSet
from .node import backward, no_grad


def finite_diff_check(f, params: ParamSet, h: float = 1e-5,
                      max_coords_per_tensor: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients of the scalar `f()` against central
    differences over every parameter coordinate (or a seeded subsample for
    large tensors). Returns the max relative error
    |a - n| / max(|a|, |n|, 1e-6).
    """
    params.zero_grad()
    out = f()
    backward(out)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value))
                for name, p in params}

    def eval_value():
        with no_grad():
            return float(f().value)

    worst = 0.0
    for name, p in params:
        flat = p.value.ravel()
        n_coords = flat.size
        if max_coords_per_tensor is not None and n_coords > max_coords_per_tensor:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(n_coords, size=max_coords_per_tensor, replace=False)
        else:
            coords = range(n_coords)
        ga = analytic[name].ravel()
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            f_plus = eval_value()
            flat[idx] = orig - h
            f_minus = eval_value()
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = ga[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            if rel > worst:
                worst = rel
    return worst
