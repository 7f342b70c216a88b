"""Bias-corrected Adam on flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, ShapeError


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, **hyper)

    def fresh(self, n: int) -> "AdamState":
        """Zeroed state for ``n`` parameters with this state's hyperparameters."""
        return replace(self, first_moment=np.zeros(n), second_moment=np.zeros(n), step_count=0)


def adam_step(state: AdamState, params, grads, lr_scale=None) -> tuple[AdamState, np.ndarray]:
    """One Adam update; ``lr_scale`` optionally scales the step per element."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if grads.shape != params.shape or state.first_moment.shape != params.shape:
        raise ShapeError(
            f"params {params.shape}, grads {grads.shape} and moments "
            f"{state.first_moment.shape} must agree"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NumericError(f"non-finite gradient at parameter index {int(bad[0])}")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    lr = state.learning_rate if lr_scale is None else state.learning_rate * np.asarray(lr_scale, float)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return replace(state, first_moment=m, second_moment=v, step_count=t), new_params
