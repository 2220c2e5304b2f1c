"""Independent reference computations shared by the test modules."""

import math

import numpy as np

try:
    import numba
except ImportError:  # pure-Python fallback, slower but identical arithmetic
    numba = None


def _rk4_samples_py(t_end, step, stride):
    n = int(round(abs(t_end) / step))
    h = step if t_end > 0 else -step
    out = np.empty(n // stride + 1)
    y = 0.0
    comp = 0.0  # Kahan compensation for the accumulated solution
    out[0] = 0.0
    for i in range(n):
        k1 = 1.0 / math.sqrt(1.0 + 2.0 * y * y)
        y2 = y + 0.5 * h * k1
        k2 = 1.0 / math.sqrt(1.0 + 2.0 * y2 * y2)
        y3 = y + 0.5 * h * k2
        k3 = 1.0 / math.sqrt(1.0 + 2.0 * y3 * y3)
        y4 = y + h * k3
        k4 = 1.0 / math.sqrt(1.0 + 2.0 * y4 * y4)
        inc = h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0 - comp
        new = y + inc
        comp = (new - y) - inc
        y = new
        if (i + 1) % stride == 0:
            out[(i + 1) // stride] = y
    return out


rk4_samples = numba.njit(cache=True)(_rk4_samples_py) if numba is not None else _rk4_samples_py


def rk4_transform(t_end: float, step: float = 1e-5, stride: int = 1000):
    """Integrate f' = 1/sqrt(1+2f^2), f(0)=0 from 0 to t_end; returns (t, f) every stride steps."""
    ys = rk4_samples(float(t_end), step, stride)
    ts = math.copysign(1.0, t_end) * np.arange(ys.size) * step * stride
    return ts, ys
