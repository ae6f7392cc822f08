"""Shared test helpers."""

import numpy as np


def check_gradients(params: dict, loss_fn, n_samples: int, seed: int = 99,
                    h: float = 1e-6, rel_tol: float = 1e-3, floor: float = 1e-6):
    """Compare analytic gradients against central finite differences.

    ``params`` maps names to Tensors; ``loss_fn()`` rebuilds the scalar loss
    from the current parameter values. Pairs where both estimates sit below
    ``floor`` (the FD noise level for float64 at h=1e-6) count as agreement.
    Returns the list of (name, index, fd, analytic) samples checked.
    """
    loss = loss_fn()
    loss.backward()
    grads = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value))
             for name, p in params.items()}
    for p in params.values():
        p.grad = None

    rng = np.random.default_rng(seed)
    names = list(params)
    checked = []
    for _ in range(n_samples):
        name = names[rng.integers(len(names))]
        p = params[name]
        idx = tuple(rng.integers(s) for s in p.value.shape)
        orig = p.value[idx]
        p.value[idx] = orig + h
        up = loss_fn().item()
        p.value[idx] = orig - h
        down = loss_fn().item()
        p.value[idx] = orig
        fd = (up - down) / (2 * h)
        an = grads[name][idx]
        checked.append((name, idx, fd, an))
        if abs(fd) < floor and abs(an) < floor:
            continue
        rel = abs(fd - an) / max(abs(fd), abs(an))
        assert rel <= rel_tol, f"{name}{idx}: fd={fd:.6e} analytic={an:.6e} rel={rel:.2e}"
    return checked
