"""
Adaptive-moment optimizer.
"""

import numpy as np

from ..exceptions import DimensionError


class Adam:
    """
    Adam over a module's named parameters.

    Args:
        named_parameters: iterable of (name, Parameter)
        lr (float): step size
        betas (tuple): first/second moment decay, (0.5, 0.9) as in GAN training
        eps (float): denominator floor
    """

    def __init__(self, named_parameters, lr, betas=(0.5, 0.9), eps=1e-8):
        self.params = dict(named_parameters)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.first = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.second = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self):
        for param in self.params.values():
            param.grad = None

    def step(self):
        """Apply one update to every parameter that received a gradient."""
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, param in self.params.items():
            if param.grad is None:
                continue
            grad = param.grad
            m = self.first[name] = self.beta1 * self.first[name] + (1.0 - self.beta1) * grad
            v = self.second[name] = self.beta2 * self.second[name] + (1.0 - self.beta2) * grad * grad
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data = (param.data - self.lr * update).astype(param.dtype)

    def state_dict(self):
        state = {}
        for name in self.params:
            state[f"m.{name}"] = self.first[name].copy()
            state[f"v.{name}"] = self.second[name].copy()
        return state

    def load_state_dict(self, state, step_count):
        for name, param in self.params.items():
            for key, store in ((f"m.{name}", self.first), (f"v.{name}", self.second)):
                if key not in state:
                    raise DimensionError(f"optimizer state is missing '{key}'")
                values = np.asarray(state[key])
                if values.shape != param.shape:
                    raise DimensionError(
                        f"optimizer state '{key}' has shape {values.shape}, expected {param.shape}"
                    )
                store[name] = values.astype(param.dtype, copy=True)
        self.step_count = int(step_count)
