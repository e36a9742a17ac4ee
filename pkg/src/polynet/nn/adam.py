"""Adam optimizer over a flat parameter vector."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError


class Adam:
    """Standard Adam with bias correction, updating parameters in place.

    A step whose gradient contains NaN or infinity is skipped entirely
    (parameters, moments, and step counter untouched) so one blown-up batch
    cannot poison the moment estimates.
    """

    def __init__(self, n_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> bool:
        """Apply one update; returns False if a non-finite gradient was skipped."""
        if params.shape != self.m.shape or grad.shape != self.m.shape:
            raise ShapeMismatchError(
                f"shape mismatch: optimizer holds {self.m.shape} parameters, "
                f"got params {params.shape} and grad {grad.shape}"
            )
        if not np.all(np.isfinite(grad)):
            return False
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return True

    def state_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": self.m.copy(),
            "v": self.v.copy(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Adam":
        m = np.asarray(state["m"], dtype=np.float64)
        opt = cls(
            m.size,
            lr=state["lr"],
            beta1=state["beta1"],
            beta2=state["beta2"],
            eps=state["eps"],
        )
        opt.t = int(state["t"])
        opt.m[...] = m
        opt.v[...] = np.asarray(state["v"], dtype=np.float64)
        return opt
