"""Compiled inner loops: counter-based normals and the Langevin stepper."""
import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 1.0 / 9007199254740992.0

CH_CAVITY = 0
CH_MECH = 1
CH_INIT = 2


@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def channel_key(seed, channel):
    return mix64(np.uint64(seed) ^ mix64(np.uint64(channel) * _GOLDEN + np.uint64(1)))


@njit(cache=True)
def complex_normal(key, counter):
    """Unit-variance circular complex normal (E|z|^2 = 1) keyed by (key, counter)."""
    c = np.uint64(counter)
    h1 = mix64(key + (np.uint64(2) * c + np.uint64(1)) * _GOLDEN)
    h2 = mix64(key + (np.uint64(2) * c + np.uint64(2)) * _GOLDEN)
    u1 = (np.float64(h1 >> np.uint64(11)) + 1.0) * _TWO53
    u2 = np.float64(h2 >> np.uint64(11)) * _TWO53
    r = math.sqrt(-math.log(u1))  # sqrt(-2 ln u)/sqrt(2)
    ang = 2.0 * math.pi * u2
    return complex(r * math.cos(ang), r * math.sin(ang))


@njit(cache=True)
def phi1(lam, h):
    """(1 - exp(-lam h)) / lam, stable for small |lam h|."""
    z = lam * h
    if abs(z) < 1e-8:
        return h * (1.0 - z / 2.0)
    return (1.0 - np.exp(-z)) / lam


@njit(cache=True)
def hold_weights(lam, h):
    """Weights (w0, w1) so that the exact response to an input varying linearly
    from u0 to u1 over one step is w0*u0 + w1*u1."""
    z = lam * h
    if abs(z) < 1e-5:
        w1 = h * (0.5 - z / 6.0 + z * z / 24.0)
        return h * (1.0 - z / 2.0 + z * z / 6.0) - w1, w1
    e = np.exp(-z)
    total = (1.0 - e) / lam
    w1 = total - (1.0 - e - z * e) / (lam * lam * h)
    return total - w1, w1


@njit(cache=True)
def step(alpha, d, b, xi0, xi1, eta_c, eta_m, c):
    """One exponential-Euler step.

    ``c`` packs precomputed coefficients:
    [E_alpha, w0, w1, E_c, phi_c, E_m, phi_m, g0, s_c, s_m, E_half, w0_half, w1_half]
    where the w's already include sqrt(kappa_ext).

    The drive of ``d`` uses alpha at mid-step and the drive of ``b`` pairs
    conj(alpha) and ``d`` at the same (end) time. Evaluating them at
    mismatched times adds a spurious damping of order detuning**2 * dt for
    drive components away from the band centre.
    """
    a_mid = c[10] * alpha + c[11] * xi0 + c[12] * (0.5 * (xi0 + xi1))
    a_new = c[0] * alpha + c[1] * xi0 + c[2] * xi1
    d_new = c[3] * d + c[4] * (-1j * c[7] * a_mid * b) + c[8] * eta_c
    b_new = c[5] * b + c[6] * (-1j * c[7] * np.conj(a_new) * d_new) + c[9] * eta_m
    return a_new, d_new, b_new


@njit(cache=True)
def integrate(xi, coef, key_c, key_m, alpha0, d0, b0, n_steps, n_burn, stride,
              out_alpha, out_d, out_b):
    """Run ``n_steps`` steps, writing every ``stride``-th state (from step 0).

    Returns (index of the first non-finite state or -1, sum |b|^2, sum |alpha|^2) with sums over
    post-burn-in steps n_burn .. n_steps (inclusive).
    """
    alpha, d, b = alpha0, d0, b0
    sb = 0.0
    sa = 0.0
    k = 0
    for n in range(n_steps + 1):
        if n % stride == 0:
            out_alpha[k] = alpha
            out_d[k] = d
            out_b[k] = b
            k += 1
        if n >= n_burn:
            sb += b.real * b.real + b.imag * b.imag
            sa += alpha.real * alpha.real + alpha.imag * alpha.imag
        if n == n_steps:
            break
        eta_c = complex_normal(key_c, n)
        eta_m = complex_normal(key_m, n)
        alpha, d, b = step(alpha, d, b, xi[n], xi[n + 1], eta_c, eta_m, coef)
        if not (abs(b) < 1e150 and abs(d) < 1e150 and abs(alpha) < 1e150):
            return n + 1, sb, sa
    return -1, sb, sa
