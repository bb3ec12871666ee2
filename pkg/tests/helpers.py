"""Shared test utilities: finite-difference gradient checking."""

from __future__ import annotations

import numpy as np
import torch


def finite_diff_entry(param: torch.Tensor, flat_index: int, loss_fn,
                      step: float = 1e-5) -> float:
    """Central finite difference of ``loss_fn()`` w.r.t. one parameter entry."""
    flat = param.data.view(-1)
    orig = flat[flat_index].item()
    with torch.no_grad():
        flat[flat_index] = orig + step
        f_plus = float(loss_fn())
        flat[flat_index] = orig - step
        f_minus = float(loss_fn())
        flat[flat_index] = orig
    return (f_plus - f_minus) / (2.0 * step)


def check_gradients(module: torch.nn.Module, loss_fn, n_samples: int,
                    rng: np.random.Generator, step: float = 1e-5,
                    rel_tol: float = 1e-4, abs_floor: float = 1e-8):
    """Compare autograd gradients against central differences.

    Samples ``n_samples`` scalar entries uniformly over all parameters.
    An entry passes when |analytic - numeric| <= max(rel_tol * scale,
    abs_floor); the absolute floor admits genuinely-zero gradients whose
    finite difference is pure rounding noise.  Returns (worst_rel, n_checked,
    failures) where failures lists (name, index, analytic, numeric).
    """
    module.zero_grad(set_to_none=True)
    loss = loss_fn()
    loss.backward()

    named = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    sizes = np.array([p.numel() for _, p in named])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_samples, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    failures = []
    worst = 0.0
    for flat in sorted(int(p) for p in picks):
        param_idx = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, param = named[param_idx]
        local = flat - int(offsets[param_idx])
        analytic = (param.grad.view(-1)[local].item()
                    if param.grad is not None else 0.0)
        numeric = finite_diff_entry(param, local, loss_fn, step)
        scale = max(abs(analytic), abs(numeric))
        err = abs(analytic - numeric)
        rel = err / scale if scale > 0 else 0.0
        worst = max(worst, rel if err > abs_floor else 0.0)
        if err > max(rel_tol * scale, abs_floor):
            failures.append((name, local, analytic, numeric))
    return worst, len(picks), failures
