"""Independent reference implementations used only by the tests."""

import math

import numpy as np


def response_by_integration(breakpoints, slopes, anchor, freq, lim_plus=-80.0, lim_minus=80.0):
    """dB response as the integral of the slope function from the anchor to ``freq`` (in octaves)."""
    b = [math.log2(v) for v in breakpoints]
    u = math.log2(freq)

    def slope_at(t):
        if t < b[0]:
            return lim_minus
        if t >= b[-1]:
            return lim_plus
        for j in range(len(b) - 1):
            if b[j] <= t < b[j + 1]:
                return slopes[j]
        raise AssertionError

    knots = sorted(set([b[anchor], u] + [v for v in b if min(u, b[anchor]) < v < max(u, b[anchor])]))
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        total += slope_at(0.5 * (lo + hi)) * (hi - lo)
    return total if u >= b[anchor] else -total


def adam_reference(grad_fn, p0, steps, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Plain scalar-loop Adam, written from the published update rule."""
    p = list(map(float, p0))
    m = [0.0] * len(p)
    v = [0.0] * len(p)
    for t in range(1, steps + 1):
        g = grad_fn(np.array(p))
        for i in range(len(p)):
            m[i] = beta1 * m[i] + (1 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1 - beta2) * g[i] ** 2
            mh = m[i] / (1 - beta1**t)
            vh = v[i] / (1 - beta2**t)
            p[i] -= lr * mh / (math.sqrt(vh) + eps)
    return np.array(p)


def karras_sigma(i, steps, sigma_start, sigma_min, rho):
    a = sigma_start ** (1.0 / rho)
    b = sigma_min ** (1.0 / rho)
    return (a + i / (steps - 1) * (b - a)) ** rho


def wiener_gain_loop(psd, sigma, n_fft):
    return np.array([p / (p + sigma * sigma * n_fft) for p in psd])
