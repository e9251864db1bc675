"""Pure-Python RK4 kernel for the qubit-cavity coefficient equations.

Mirrors ``_kernels.pyx`` exactly; used when the extension is not built and as
the reference the compiled kernel is tested against.

State layout (10 complex): g0f0, g0g1, e0f0, e0g1, g0e0, f0f0, g1g1, f0g1,
g0g0, e0e0. ``rates`` layout: see :data:`RATE_NAMES`.
"""

import cmath
import math

import numpy as np

RATE_NAMES = (
    "w_f0",  # 2*delta + alpha
    "delta",
    "w_e0",  # delta + alpha
    "alpha",
    "kappa",
    "g2_ef",  # 1/T2_ef
    "g2_ge",
    "g1_ef",  # 1/T1_ef
    "g1_ge",
    "g_cross",  # sqrt(1/(T1_ge T1_ef))
)
N_COEFF = 10


def _deriv(t, c, g, d, r, interaction, c_g1f0=None):
    w_f0, delta, w_e0, alpha, kappa, g2ef, g2ge, g1ef, g1ge, gx = r
    c0, c1, c2, c3, c4, c5, c6, c7, c8, c9 = c
    gc = g.conjugate()
    if interaction:
        d0 = (1j * d - g2ef) * c0 - 1j * g * c1
        d1 = -0.5 * kappa * c1 - 1j * gc * c0
        d2 = (1j * d - (g2ge + g2ef)) * c2 - 1j * g * c3
        d3 = -(0.5 * kappa + g2ge) * c3 - 1j * gc * c2
        d4 = -g2ge * c4 + gx * cmath.exp(-1j * alpha * t) * c2
    else:
        d0 = (1j * (w_f0 + d) - g2ef) * c0 - 1j * g * c1
        d1 = (1j * w_f0 - 0.5 * kappa) * c1 - 1j * gc * c0
        d2 = (1j * (delta + d) - (g2ge + g2ef)) * c2 - 1j * g * c3
        d3 = (1j * delta - (0.5 * kappa + g2ge)) * c3 - 1j * gc * c2
        d4 = (1j * w_e0 - g2ge) * c4 + gx * c2
    if c_g1f0 is None:
        z = -1j * g * c7
        flow = 2.0 * z.real  # i g* conj(c7) - i g c7
    else:
        flow = 1j * gc * c_g1f0 - 1j * g * c7
    d5 = flow - g1ef * c5
    d6 = -flow - kappa * c6
    d7 = 1j * gc * (c6 - c5) - (0.5 * kappa + g2ef + 1j * d) * c7
    d8 = kappa * c6 + g1ge * c9
    d9 = -g1ge * c9 + g1ef * c5
    out = [d0, d1, d2, d3, d4, d5, d6, d7, d8, d9]
    if c_g1f0 is not None:
        out.append(-1j * g * (c6 - c5) - (0.5 * kappa + g2ef - 1j * d) * c_g1f0)
    return out


def derivative(c, g, rates, stark=0.0, t=0.0, interaction=False):
    """Time derivative of the coefficient vector for a fixed coupling ``g``."""
    return np.array(_deriv(t, [complex(x) for x in c], complex(g), float(stark), tuple(rates), interaction))


def integrate_coefficients(y0, g_half, stark_half, t0, dt, n_steps, rates, interaction, independent_conjugate=False):
    """Classic RK4 with coupling samples on the half-step grid.

    ``g_half[2k]`` is the coupling at ``t0 + k dt`` and ``g_half[2k+1]`` at
    ``t0 + (k + 1/2) dt``. Returns an ``(n_steps + 1, 10)`` complex array
    (11 columns with ``independent_conjugate``, the last being C_g1f0
    integrated as its own variable).
    """
    r = tuple(float(x) for x in rates)
    y = [complex(x) for x in y0]
    if independent_conjugate:
        y.append(y[7].conjugate())
    n = len(y)
    out = np.empty((n_steps + 1, n), dtype=complex)
    out[0] = y
    g_half = [complex(x) for x in g_half]
    s_half = [float(x) for x in stark_half]
    h = dt
    for k in range(n_steps):
        t = t0 + k * h
        ga, gb, gc = g_half[2 * k], g_half[2 * k + 1], g_half[2 * k + 2]
        sa, sb, sc = s_half[2 * k], s_half[2 * k + 1], s_half[2 * k + 2]

        def f(tt, yy, gg, ss):
            if independent_conjugate:
                return _deriv(tt, yy[:10], gg, ss, r, interaction, yy[10])
            return _deriv(tt, yy, gg, ss, r, interaction)

        k1 = f(t, y, ga, sa)
        k2 = f(t + 0.5 * h, [y[i] + 0.5 * h * k1[i] for i in range(n)], gb, sb)
        k3 = f(t + 0.5 * h, [y[i] + 0.5 * h * k2[i] for i in range(n)], gb, sb)
        k4 = f(t + h, [y[i] + h * k3[i] for i in range(n)], gc, sc)
        y = [y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)]
        out[k + 1] = y
    return out


def frame_frequencies(rates):
    """Rotation rate of each coefficient removed in the interaction picture."""
    w_f0, delta, w_e0 = rates[0], rates[1], rates[2]
    return np.array([w_f0, w_f0, delta, delta, w_e0, 0, 0, 0, 0, 0], dtype=float)


def stability_limit(rates) -> float:
    """Largest |omega| * dt the literal build can take (RK4 imaginary-axis bound)."""
    return 2.0 * math.sqrt(2.0) / max(abs(float(rates[0])), abs(float(rates[1])), abs(float(rates[2])), 1e-300)
