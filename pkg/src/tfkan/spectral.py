"""Differentiable one-sided discrete Fourier transform along one axis.

The forward transform of a real signal of length L keeps the floor(L/2)+1
non-redundant complex bins, carried as a pair of real arrays so the rest of
the graph stays real-valued.  The inverse applies the 1/L-normalized
conjugate-symmetric reconstruction; the imaginary parts of the DC bin (and
the Nyquist bin when L is even) cannot influence a real signal, so their
gradients are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Node, ShapeError

__all__ = ["Spectrum", "domain_transform", "domain_detransform", "complex_linear_combine"]


@dataclass(frozen=True)
class Spectrum:
    """One-sided spectrum: real/imaginary parts plus the original length."""

    re: Node
    im: Node
    length: int

    def __post_init__(self):
        if self.re.value.shape != self.im.value.shape:
            raise ShapeError(
                f"spectrum parts differ: {self.re.value.shape} vs {self.im.value.shape}"
            )

    @property
    def bins(self) -> int:
        return self.length // 2 + 1


def _bin_weights(length: int, bins: int, shape, axis: int) -> np.ndarray:
    # 1 at DC and (even length) Nyquist, 2 at the doubled interior bins.
    w = np.full(bins, 2.0)
    w[0] = 1.0
    if length % 2 == 0:
        w[-1] = 1.0
    expand = [1] * len(shape)
    expand[axis] = bins
    return w.reshape(expand)


def domain_transform(x: Node, axis: int) -> Spectrum:
    """Real signal -> one-sided spectrum along ``axis`` (unnormalized forward)."""
    length = x.value.shape[axis]
    if length < 2:
        raise ValueError(f"transform needs axis extent >= 2, got {length}")
    z = np.fft.rfft(x.value, axis=axis)
    bins = z.shape[axis]
    half = 1.0 / _bin_weights(length, bins, z.shape, axis)

    def rule_re(g):
        return (length * np.fft.irfft(g * half, n=length, axis=axis),)

    def rule_im(g):
        return (length * np.fft.irfft(1j * g * half, n=length, axis=axis),)

    if x.requires_grad:
        re = Node(np.ascontiguousarray(z.real), (x,), rule_re, requires_grad=True)
        im = Node(np.ascontiguousarray(z.imag), (x,), rule_im, requires_grad=True)
    else:
        re = Node(np.ascontiguousarray(z.real))
        im = Node(np.ascontiguousarray(z.imag))
    return Spectrum(re, im, length)


def domain_detransform(spectrum: Spectrum, axis: int) -> Node:
    """One-sided spectrum -> real signal of the recorded length along ``axis``."""
    re, im = spectrum.re, spectrum.im
    length = spectrum.length
    if re.value.shape[axis] != spectrum.bins:
        raise ValueError(
            f"spectrum has {re.value.shape[axis]} bins along axis {axis}, "
            f"expected {spectrum.bins} for length {length}"
        )
    z = re.value + 1j * im.value
    value = np.fft.irfft(z, n=length, axis=axis)
    weights = _bin_weights(length, spectrum.bins, z.shape, axis)

    def rule(g):
        gz = np.fft.rfft(g, axis=axis) * (weights / length)
        g_re = np.ascontiguousarray(gz.real)
        g_im = np.ascontiguousarray(gz.imag)
        # A real reconstruction is insensitive to these imaginary parts.
        dc = [slice(None)] * g_im.ndim
        dc[axis] = 0
        g_im[tuple(dc)] = 0.0
        if length % 2 == 0:
            dc[axis] = -1
            g_im[tuple(dc)] = 0.0
        return g_re, g_im

    if re.requires_grad or im.requires_grad:
        return Node(value, (re, im), rule, requires_grad=True)
    return Node(value)


def complex_linear_combine(re: Node, im: Node, length: int) -> Spectrum:
    """Pack independently produced real/imaginary parts as one spectrum."""
    return Spectrum(re, im, length)
