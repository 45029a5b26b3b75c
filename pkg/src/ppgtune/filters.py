"""IIR band-pass design and zero-phase application.

Designs go analog prototype (poles/zeros/gain) -> low-pass to band-pass
transform at pre-warped edges -> bilinear transform -> second-order
sections. ``order`` is the order of the low-pass prototype, so a band-pass
design has ``2 * order`` poles and ``order`` sections.

For Chebyshev-II and elliptic designs the band edges are where the
prototype reaches its stopband (Chebyshev-II) or passband (elliptic) corner.
Chebyshev-II edges therefore sit at ``-stopband_atten_db``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

from . import _kernels
from .errors import (
    DesignFailure,
    InsufficientData,
    InvalidBand,
    InvalidFrequency,
    InvalidInput,
    NyquistViolation,
)
from .signals import Signal

STABILITY_MARGIN = 1e-9


class Family(str, Enum):
    CHEBYSHEV2 = "chebyshev2"
    ELLIPTIC = "elliptic"
    BUTTERWORTH = "butterworth"


@dataclass(frozen=True)
class FilterSpec:
    family: Family
    order: int
    f_low: float
    f_high: float
    stopband_atten_db: float = 40.0
    passband_ripple_db: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.order < 2 or self.order % 2:
            raise InvalidInput(f"band-pass order must be even and >= 2, got {self.order}")
        if self.family is not Family.BUTTERWORTH and self.stopband_atten_db <= 0:
            raise InvalidInput("stopband attenuation must be positive")
        if self.family is Family.ELLIPTIC and not 0 < self.passband_ripple_db < self.stopband_atten_db:
            raise InvalidInput("passband ripple must be positive and below the stopband attenuation")


def ppg_filter(f_low, f_high, order=4, stopband_atten_db=40.0) -> FilterSpec:
    return FilterSpec(Family.CHEBYSHEV2, order, f_low, f_high, stopband_atten_db)


def ecg_filter(f_low=1.0, f_high=15.0, order=4, passband_ripple_db=1.0, stopband_atten_db=40.0) -> FilterSpec:
    return FilterSpec(Family.ELLIPTIC, order, f_low, f_high, stopband_atten_db, passband_ripple_db)


@dataclass(frozen=True)
class SosCascade:
    """Cascade of biquads, one row ``(b0, b1, b2, 1, a1, a2)`` per section."""

    sos: np.ndarray

    def __post_init__(self):
        arr = np.array(self.sos, dtype=np.float64, copy=True).reshape(-1, 6)
        arr.flags.writeable = False
        object.__setattr__(self, "sos", arr)

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]

    @property
    def sections(self) -> list[tuple[float, float, float, float, float]]:
        return [(r[0], r[1], r[2], r[4], r[5]) for r in self.sos]

    def poles(self) -> np.ndarray:
        return np.concatenate([np.roots(r[3:]) for r in self.sos]) if self.n_sections else np.empty(0, complex)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0 - STABILITY_MARGIN))


# ---------------------------------------------------------------------------
# analog low-pass prototypes, cutoff normalized to 1 rad/s


def _butter_proto(n):
    p = -np.exp(1j * np.pi * np.arange(-n + 1, n, 2) / (2 * n))
    return np.empty(0, complex), p, 1.0


def _cheby2_proto(n, rs):
    # Stopband edge at 1 rad/s; equiripple stopband at -rs dB.
    de = 1.0 / math.sqrt(10 ** (0.1 * rs) - 1)
    mu = math.asinh(1.0 / de) / n
    if n % 2:
        m = np.concatenate((np.arange(-n + 1, 0, 2), np.arange(2, n, 2)))
    else:
        m = np.arange(-n + 1, n, 2)
    z = -np.conjugate(1j / np.sin(m * np.pi / (2.0 * n)))
    p = -np.exp(1j * np.pi * np.arange(-n + 1, n, 2) / (2.0 * n))
    p = math.sinh(mu) * p.real + 1j * math.cosh(mu) * p.imag
    p = 1.0 / p
    k = float(np.real(np.prod(-p) / np.prod(-z)))
    return z, p, k


def _modulus_from_ratio(krat):
    """Parameter m with K(m)/K(1-m) = krat, via the theta-function nome formula."""
    q = math.exp(-math.pi / krat)
    th2 = 0.0
    th3 = 1.0
    for i in range(200):
        t2 = q ** (i * (i + 1))
        th2 += t2
        if i > 0:
            t3 = q ** (i * i)
            th3 += 2 * t3
        if t2 < 1e-18:
            break
    th2 *= 2 * q**0.25
    return (th2 / th3) ** 4


def _ellip_proto(n, rp, rs):
    # Passband edge at 1 rad/s with rp dB ripple; stopband at -rs dB.
    eps_sq = 10 ** (0.1 * rp) - 1
    eps = math.sqrt(eps_sq)
    ck1_sq = eps_sq / (10 ** (0.1 * rs) - 1)
    k_ck1 = special.ellipk(ck1_sq)
    k_ck1c = special.ellipk(1 - ck1_sq)
    m = _modulus_from_ratio(n * k_ck1 / k_ck1c)
    capk = special.ellipk(m)
    j = np.arange(1 - n % 2, n, 2)
    s, c, d, _ = special.ellipj(j * capk / n, m * np.ones(len(j)))
    snew = s[np.abs(s) > 1e-12]
    z = 1j / (math.sqrt(m) * snew)
    z = np.concatenate((z, np.conjugate(z)))
    r = special.ellipkinc(math.atan(1.0 / eps), 1 - ck1_sq)
    v0 = capk * r / (n * k_ck1)
    sv, cv, dv, _ = special.ellipj(v0, 1 - m)
    p = -(c * d * sv * cv + 1j * s * dv) / (1 - (d * sv) ** 2.0)
    if n % 2:
        keep = np.abs(p.imag) > 1e-12 * np.sqrt(np.sum(p * np.conjugate(p)).real)
        p = np.concatenate((p, np.conjugate(p[keep])))
    else:
        p = np.concatenate((p, np.conjugate(p)))
    k = float(np.real(np.prod(-p) / np.prod(-z)))
    if n % 2 == 0:
        k /= math.sqrt(1 + eps_sq)
    return z, p, k


# ---------------------------------------------------------------------------
# transforms


def _lp_to_bp(z, p, k, w_lo, w_hi):
    bw = w_hi - w_lo
    w0 = math.sqrt(w_lo * w_hi)
    z = np.asarray(z, complex) * bw / 2
    p = np.asarray(p, complex) * bw / 2
    zr = np.sqrt(z * z - w0 * w0)
    pr = np.sqrt(p * p - w0 * w0)
    degree = len(p) - len(z)
    z_bp = np.concatenate((z + zr, z - zr, np.zeros(degree)))
    p_bp = np.concatenate((p + pr, p - pr))
    return z_bp, p_bp, k * bw**degree


def _bilinear(z, p, k, fs):
    fs2 = 2.0 * fs
    degree = len(p) - len(z)
    z_d = (fs2 + z) / (fs2 - z)
    p_d = (fs2 + p) / (fs2 - p)
    z_d = np.concatenate((z_d, -np.ones(degree)))
    k_d = k * np.real(np.prod(fs2 - z) / np.prod(fs2 - p))
    return z_d, p_d, float(k_d)


def _split_conjugates(values, tol=1e-10):
    """Group roots into conjugate pairs (upper member kept) and real singles."""
    values = np.asarray(values, complex)
    scale = max(1.0, float(np.max(np.abs(values)))) if len(values) else 1.0
    is_real = np.abs(values.imag) <= tol * scale
    reals = sorted(values[is_real].real.tolist())
    upper = values[values.imag > tol * scale]
    lower = list(values[values.imag < -tol * scale])
    pairs = []
    for u in upper:
        if not lower:
            raise DesignFailure("unpaired complex root")
        dist = [abs(u - np.conjugate(v)) for v in lower]
        lower.pop(int(np.argmin(dist)))
        pairs.append(complex(u))
    if lower:
        raise DesignFailure("unpaired complex root")
    return pairs, reals


def _zpk_to_sos(z, p, k):
    p_pairs, p_reals = _split_conjugates(p)
    z_pairs, z_reals = _split_conjugates(z)
    # pole groups: each complex pair, then reals two at a time
    groups = [(pc, np.conjugate(pc)) for pc in p_pairs]
    p_reals = sorted(p_reals, key=abs, reverse=True)
    for i in range(0, len(p_reals), 2):
        groups.append(tuple(p_reals[i:i + 2]))
    # zeros go to the pole group nearest the unit circle first
    groups.sort(key=lambda g: -max(abs(x) for x in g))
    z_pairs = list(z_pairs)
    z_reals = list(z_reals)
    sections = []
    for g in groups:
        anchor = g[0]
        want = len(g)
        zs = []
        if want == 2 and z_pairs:
            i = int(np.argmin([abs(zc - anchor) for zc in z_pairs]))
            zc = z_pairs.pop(i)
            zs = [zc, np.conjugate(zc)]
        else:
            while len(zs) < want and z_reals:
                i = int(np.argmin([abs(zr - anchor) for zr in z_reals]))
                zs.append(z_reals.pop(i))
            while len(zs) < want and z_pairs:
                # a real pole left with only complex zeros: take a whole pair
                zc = z_pairs.pop(0)
                zs += [zc, np.conjugate(zc)]
                want = 2
        sections.append((list(g), zs))
    if z_pairs or z_reals:
        raise DesignFailure("more zeros than poles")
    sections.sort(key=lambda s: max(abs(x) for x in s[0]))
    rows = []
    for i, (ps, zs) in enumerate(sections):
        b = np.real(np.poly(zs)) if zs else np.array([1.0])
        a = np.real(np.poly(ps))
        b = np.concatenate((b, np.zeros(3 - len(b))))
        a = np.concatenate((a, np.zeros(3 - len(a))))
        if i == 0:
            b = b * k
        rows.append(np.concatenate((b, a)))
    return np.array(rows)


def design_bandpass(spec: FilterSpec, fs: float) -> SosCascade:
    if not (0 < spec.f_low < spec.f_high):
        raise InvalidBand(f"need 0 < f_low < f_high, got ({spec.f_low}, {spec.f_high})")
    if spec.f_high >= fs / 2:
        raise NyquistViolation(f"f_high={spec.f_high} Hz is not below Nyquist ({fs / 2} Hz)")
    n = spec.order
    if spec.family is Family.BUTTERWORTH:
        z, p, k = _butter_proto(n)
    elif spec.family is Family.CHEBYSHEV2:
        z, p, k = _cheby2_proto(n, spec.stopband_atten_db)
    else:
        z, p, k = _ellip_proto(n, spec.passband_ripple_db, spec.stopband_atten_db)
    w_lo = 2 * fs * math.tan(math.pi * spec.f_low / fs)
    w_hi = 2 * fs * math.tan(math.pi * spec.f_high / fs)
    z, p, k = _lp_to_bp(z, p, k, w_lo, w_hi)
    z, p, k = _bilinear(z, p, k, fs)
    cascade = SosCascade(_zpk_to_sos(z, p, k))
    if not cascade.is_stable():
        raise DesignFailure(f"unstable design for {spec} at fs={fs}")
    return cascade


def frequency_response(cascade: SosCascade, freqs, fs: float) -> np.ndarray:
    f = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(f < 0) or np.any(f > fs / 2) or not np.all(np.isfinite(f)):
        raise InvalidFrequency(f"frequencies must lie in [0, {fs / 2}]")
    zi = np.exp(-2j * np.pi * f / fs)
    h = np.ones(len(f), complex)
    for b0, b1, b2, _, a1, a2 in cascade.sos:
        h *= (b0 + b1 * zi + b2 * zi * zi) / (1.0 + a1 * zi + a2 * zi * zi)
    return h


def _steady_state(sos):
    """Initial section states for a unit step already in steady state."""
    zi = np.empty((sos.shape[0], 2))
    scale = 1.0
    for s, (b0, b1, b2, _, a1, a2) in enumerate(sos):
        # transposed DF-II: solve (I - A) z = B
        A = np.array([[-a1, 1.0], [-a2, 0.0]])
        B = np.array([b1 - a1 * b0, b2 - a2 * b0])
        zi[s] = scale * np.linalg.solve(np.eye(2) - A, B)
        scale *= (b0 + b1 + b2) / (1.0 + a1 + a2)
    return zi


def padlen(cascade: SosCascade) -> int:
    return 3 * 2 * cascade.n_sections


def sosfiltfilt(sos, x) -> np.ndarray:
    """Forward-backward filtering with odd-reflected edges of 6 samples per section."""
    sos = np.array(sos, dtype=np.float64)  # writable copy; scipy rejects read-only buffers
    x = np.asarray(x, dtype=np.float64)
    npad = 6 * sos.shape[0]
    if x.shape[0] <= npad:
        raise InsufficientData(f"signal of {x.shape[0]} samples too short for {npad}-sample edge padding")
    left = 2 * x[0] - x[npad:0:-1]
    right = 2 * x[-1] - x[-2:-npad - 2:-1]
    ext = np.concatenate((left, x, right))
    zi = _steady_state(sos)
    y, _ = _kernels.sosfilt(sos, ext, zi * ext[0])
    y = np.ascontiguousarray(y[::-1])
    y, _ = _kernels.sosfilt(sos, y, zi * y[0])
    return y[::-1][npad:-npad].copy()


def apply_zero_phase(cascade: SosCascade, signal: Signal) -> Signal:
    return signal.replace(samples=sosfiltfilt(cascade.sos, signal.samples))


def bandpass(signal: Signal, spec: FilterSpec) -> Signal:
    return apply_zero_phase(design_bandpass(spec, signal.fs), signal)
