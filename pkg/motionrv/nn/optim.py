from dataclasses import dataclass, field

import numpy as np

from motionrv.errors import ShapeError


@dataclass
class AdamState:
    r"""Adam hyperparameters plus per-parameter moment estimates"""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    r"""One bias-corrected Adam update, applied to ``params`` in place.

    Returns:
        The same ``params`` mapping and ``state`` for chaining.
    """
    if set(params) != set(grads):
        raise ShapeError(f"gradient names differ from parameter names: "
                         f"{sorted(set(params) ^ set(grads))}")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step

    # Sorted names give a fixed update order
    for name in sorted(params):
        p, g = params[name], grads[name]
        if p.shape != g.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} vs "
                             f"parameter shape {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
