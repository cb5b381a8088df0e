"""Spatial smoothing kernels and convolution.

Convolution convention: ``out[x] = sum_n taps(n) * f[x - n]``, so a kernel with
taps only at ``n >= 0`` (the Poisson kernel) reads current and earlier
positions only.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfc

from .errors import InvalidScale, UnstableStep, UnsupportedOrder

DEFAULT_TRUNC = 1e-12
SMOOTHING_FAMILIES = ("discrete-gaussian", "sampled-gaussian", "poisson")


class Boundary(str, enum.Enum):
    RENORMALIZE = "renormalize"
    MIRROR = "mirror"
    ZERO = "zero-pad"


@dataclass(frozen=True)
class Kernel1D:
    taps: np.ndarray
    center: int
    scale: float
    family: str
    order: int = 0

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(len(self.taps)) - self.center

    def tap(self, n: int) -> float:
        i = n + self.center
        return float(self.taps[i]) if 0 <= i < len(self.taps) else 0.0

    @property
    def is_smoothing(self) -> bool:
        return self.family in SMOOTHING_FAMILIES


def _check_trunc(trunc_mass):
    if not 0 < trunc_mass <= 1e-3:
        raise ValueError("trunc_mass must lie in (0, 1e-3]")


def _impulse(family):
    return Kernel1D(np.ones(1), 0, 0.0, family)


def _symmetric(half: np.ndarray) -> np.ndarray:
    return np.concatenate([half[:0:-1], half])


# ---------------------------------------------------------------------------
# modified Bessel functions


def bessel_i_scaled(n_max: int, s: float) -> np.ndarray:
    """``exp(-s) * I_n(s)`` for ``n = 0..n_max``.

    Ascending series for ``s <= 20``; above that, Miller's downward recurrence
    normalised with ``I_0 + 2 * sum_{n>0} I_n = exp(s)``.
    """
    if s < 0:
        raise InvalidScale(f"scale must be >= 0, got {s}")
    out = np.zeros(n_max + 1)
    if s == 0:
        out[0] = 1.0
        return out
    if s <= 20.0:
        half = 0.5 * s
        q = half * half
        lead = math.exp(-s)  # exp(-s) * half**n / n!, built as a product to keep relative accuracy
        for n in range(n_max + 1):
            if n:
                lead *= half / n
            term = lead
            total, k = term, 0
            while term > 1e-17 * total:
                k += 1
                term *= q / (k * (k + n))
                total += term
            out[n] = total
        return out
    start = n_max + int(12 * math.sqrt(s)) + 30
    start += start % 2
    vals = np.zeros(start + 2)
    vals[start] = 1e-300
    for k in range(start, 0, -1):
        vals[k - 1] = vals[k + 1] + (2.0 * k / s) * vals[k]
        if vals[k - 1] > 1e250:
            vals *= 1e-250
    norm = vals[0] + 2.0 * vals[1:].sum()
    return vals[: n_max + 1] / norm


# ---------------------------------------------------------------------------
# kernel families


def sampled_gaussian_kernel(s: float, trunc_mass: float = DEFAULT_TRUNC) -> Kernel1D:
    if s <= 0:
        raise InvalidScale(f"sampled Gaussian needs s > 0, got {s}")
    _check_trunc(trunc_mass)
    r = math.ceil(4 * math.sqrt(s))
    while erfc((r + 0.5) / math.sqrt(2 * s)) >= trunc_mass:
        r += 1
    n = np.arange(r + 1)
    half = np.exp(-(n**2) / (2 * s)) / math.sqrt(2 * math.pi * s)
    taps = _symmetric(half)
    return Kernel1D(taps / taps.sum(), r, float(s), "sampled-gaussian")


def discrete_gaussian_taps(s: float, radius: int) -> np.ndarray:
    """Untruncated-value taps ``exp(-s) I_n(s)`` for ``|n| <= radius`` (no renormalisation)."""
    return _symmetric(bessel_i_scaled(radius, s))


def discrete_gaussian_kernel(s: float, trunc_mass: float = DEFAULT_TRUNC) -> Kernel1D:
    if s < 0:
        raise InvalidScale(f"discrete Gaussian needs s >= 0, got {s}")
    _check_trunc(trunc_mass)
    if s == 0:
        return _impulse("discrete-gaussian")
    r = max(1, math.ceil(4 * math.sqrt(s)))
    cap = math.ceil(40 * math.sqrt(s)) + 40
    half = bessel_i_scaled(r, s)
    while 1.0 - (half[0] + 2 * half[1:].sum()) >= trunc_mass and r < cap:
        r += max(1, r // 4)
        half = bessel_i_scaled(r, s)
    taps = _symmetric(half)
    return Kernel1D(taps / taps.sum(), r, float(s), "discrete-gaussian")


def poisson_kernel(s: float, trunc_mass: float = DEFAULT_TRUNC) -> Kernel1D:
    if s < 0:
        raise InvalidScale(f"Poisson kernel needs s >= 0, got {s}")
    _check_trunc(trunc_mass)
    if s == 0:
        return _impulse("poisson")
    taps, cum, n = [], 0.0, 0
    log_s = math.log(s)
    while True:
        t = math.exp(-s + n * log_s - math.lgamma(n + 1))
        taps.append(t)
        cum += t
        if cum >= 1.0 - trunc_mass and n >= s:
            break
        n += 1
    taps = np.array(taps)
    return Kernel1D(taps / taps.sum(), 0, float(s), "poisson")


def gaussian_derivative_kernel(s: float, order: int, trunc_mass: float = DEFAULT_TRUNC, zero_sum: bool = False) -> Kernel1D:
    """Sampled ``order``-th derivative of the Gaussian density.

    Odd orders are exactly antisymmetric (zero sum); even orders are left as
    raw samples unless ``zero_sum`` asks for mean subtraction.
    """
    if s <= 0:
        raise InvalidScale(f"Gaussian derivative needs s > 0, got {s}")
    if order not in (1, 2, 3):
        raise UnsupportedOrder(f"derivative order must be 1, 2 or 3, got {order}")
    _check_trunc(trunc_mass)
    r = math.ceil(4 * math.sqrt(s))
    while erfc((r + 0.5) / math.sqrt(2 * s)) >= trunc_mass:
        r += 1
    r += order * math.ceil(math.sqrt(s))
    n = np.arange(-r, r + 1, dtype=float)
    g = np.exp(-(n**2) / (2 * s)) / math.sqrt(2 * math.pi * s)
    if order == 1:
        taps = -n / s * g
    elif order == 2:
        taps = (n**2 / s**2 - 1 / s) * g
    else:
        taps = (3 * n / s**2 - n**3 / s**3) * g
    if order % 2 == 1:
        taps = 0.5 * (taps - taps[::-1])
    elif zero_sum:
        taps = taps - taps.mean()
    return Kernel1D(taps, r, float(s), "gaussian-derivative", order)


KERNEL_FAMILIES: dict[str, Callable[..., Kernel1D]] = {
    "discrete-gaussian": discrete_gaussian_kernel,
    "sampled-gaussian": sampled_gaussian_kernel,
    "poisson": poisson_kernel,
}


def smoothing_kernel(s: float, family: str = "discrete-gaussian", trunc_mass: float = DEFAULT_TRUNC) -> Kernel1D:
    try:
        make = KERNEL_FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown kernel family {family!r}") from None
    if s == 0:
        return _impulse(family)
    return make(s, trunc_mass)


# ---------------------------------------------------------------------------
# convolution


def _shift_sum(padded: np.ndarray, taps, offsets, left: int, n: int) -> np.ndarray:
    out = np.zeros((n,) + padded.shape[1:])
    for t, off in zip(taps, offsets):
        if t != 0.0:
            start = left - off
            out += t * padded[start : start + n]
    return out


def _overlap_weights(kernel: Kernel1D, n: int) -> np.ndarray:
    """Sum of the taps that land inside ``[0, n)`` when spread from each source position."""
    w = np.zeros(n)
    for t, off in zip(kernel.taps, kernel.offsets):
        lo, hi = max(0, -off), min(n, n - off)
        if lo < hi:
            w[lo:hi] += t
    return w


def convolve_1d(signal, kernel: Kernel1D, boundary: Boundary | str = Boundary.RENORMALIZE) -> np.ndarray:
    """Convolve along axis 0; output has the input's shape.

    ``renormalize``: the taps each source position spreads inside the signal are
    rescaled to sum 1, so total mass is conserved exactly. It applies to
    smoothing kernels only; derivative kernels fall back to ``mirror``.
    ``mirror``: half-sample symmetric extension. ``zero-pad``: zeros outside.
    """
    f = np.asarray(signal, dtype=float)
    if f.shape[0] == 0:
        raise ValueError("signal is empty")
    boundary = Boundary(boundary)
    if boundary is Boundary.RENORMALIZE and not kernel.is_smoothing:
        boundary = Boundary.MIRROR
    n = f.shape[0]
    offsets = kernel.offsets
    left, right = max(0, int(offsets.max())), max(0, int(-offsets.min()))
    if boundary is Boundary.RENORMALIZE:
        w = _overlap_weights(kernel, n).reshape((n,) + (1,) * (f.ndim - 1))
        f = f / w
    pad = [(left, right)] + [(0, 0)] * (f.ndim - 1)
    if boundary is Boundary.MIRROR:
        padded = np.pad(f, pad, mode="symmetric")
    else:
        padded = np.pad(f, pad, mode="constant")
    return _shift_sum(padded, kernel.taps, offsets, left, n)


def smooth_spatial(values, s_x: float, family: str = "discrete-gaussian", boundary=Boundary.RENORMALIZE, trunc_mass=DEFAULT_TRUNC):
    values = np.asarray(values, dtype=float)
    if s_x == 0:
        return values.copy()
    return convolve_1d(values, smoothing_kernel(s_x, family, trunc_mass), boundary)


def apply_semantic(values, semantic_op) -> np.ndarray:
    """Apply a semantic operator along the last axis.

    ``semantic_op`` is ``None`` (identity), a callable on the array, or an
    ``M x M`` row-stochastic matrix applied as ``values @ op``.
    """
    if semantic_op is None:
        return np.array(values, dtype=float)
    if callable(semantic_op):
        return np.asarray(semantic_op(values), dtype=float)
    return np.asarray(values, dtype=float) @ np.asarray(semantic_op)


def smooth_separable_2d(sig, s_x: float, semantic_op=None, boundary=Boundary.RENORMALIZE, family="discrete-gaussian", trunc_mass=DEFAULT_TRUNC):
    """Spatial smoothing down every column, then the semantic operator along every row."""
    if s_x < 0:
        raise InvalidScale(f"spatial scale must be >= 0, got {s_x}")
    values = sig.values if hasattr(sig, "values") else sig
    out = smooth_spatial(values, s_x, family, boundary, trunc_mass)
    out = apply_semantic(out, semantic_op)
    if hasattr(sig, "values"):
        out = np.maximum(out, 0.0)
        normalized = getattr(sig, "normalized", False) and abs(out.sum() - 1.0) < 1e-9
        return dataclasses.replace(sig, values=out, normalized=normalized)
    return out


def diffusion_oracle(signal, s: float, dt: float = 0.05) -> np.ndarray:
    """Explicit Euler integration of ``d/ds u = 0.5 * (u[x+1] - 2u[x] + u[x-1])``.

    Reflecting (Neumann) boundaries. Reference solution for tests only.
    """
    if dt > 0.25:
        raise UnstableStep(f"dt must be <= 0.25, got {dt}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.array(signal, dtype=float)
    if s == 0:
        return u
    steps = math.ceil(s / dt)
    h = s / steps
    for _ in range(steps):
        p = np.pad(u, 1, mode="edge")
        u = u + 0.5 * h * (p[2:] - 2 * u + p[:-2])
    return u
