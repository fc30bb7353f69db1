"""Adam over a named dict of numpy tensors."""

import numpy as np

from .errors import NumericError


class Adam:
    """Per-parameter adaptive steps with bias-corrected moment estimates.

    Mutates the tensors it was given in place; `step` checks that no update
    introduced non-finite values.
    """

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 lr_scale=None):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.lr_scale = lr_scale or {}
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict):
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            if key not in self.params:
                raise KeyError(f"gradient for unknown parameter {key!r}")
            p = self.params[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            lr = self.lr * self.lr_scale.get(key, 1.0)
            p -= lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            if not np.all(np.isfinite(p)):
                raise NumericError(f"non-finite values in parameter {key!r} after update")


def zero_grads_like(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}
