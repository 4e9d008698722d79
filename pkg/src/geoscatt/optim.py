"""Adam over lists of parameter tensors, with coupled L2 weight decay."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, tensors: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(t) for t in tensors]
        self.v = [np.zeros_like(t) for t in tensors]
        self.t = 0

    def step(self, tensors: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """One in-place update; decay is added to the gradient (classic Adam)."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (theta, g) in enumerate(zip(tensors, grads)):
            if self.weight_decay:
                g = g + self.weight_decay * theta
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
