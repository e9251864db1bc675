# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 kernel for the qubit-cavity coefficient equations.

Same contract as ``tbf._kernels_py.integrate_coefficients``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

ctypedef double complex cplx


cdef inline void deriv(double t, const cplx* c, cplx g, double d, const double* r,
                       bint interaction, cplx* out) noexcept nogil:
    cdef double w_f0 = r[0], delta = r[1], w_e0 = r[2], alpha = r[3], kappa = r[4]
    cdef double g2ef = r[5], g2ge = r[6], g1ef = r[7], g1ge = r[8], gx = r[9]
    cdef cplx I = 1j
    cdef cplx gc = g.conjugate()
    cdef cplx z, rot
    cdef double flow
    if interaction:
        out[0] = (I * d - g2ef) * c[0] - I * g * c[1]
        out[1] = -0.5 * kappa * c[1] - I * gc * c[0]
        out[2] = (I * d - (g2ge + g2ef)) * c[2] - I * g * c[3]
        out[3] = -(0.5 * kappa + g2ge) * c[3] - I * gc * c[2]
        rot = cos(alpha * t) - I * sin(alpha * t)
        out[4] = -g2ge * c[4] + gx * rot * c[2]
    else:
        out[0] = (I * (w_f0 + d) - g2ef) * c[0] - I * g * c[1]
        out[1] = (I * w_f0 - 0.5 * kappa) * c[1] - I * gc * c[0]
        out[2] = (I * (delta + d) - (g2ge + g2ef)) * c[2] - I * g * c[3]
        out[3] = (I * delta - (0.5 * kappa + g2ge)) * c[3] - I * gc * c[2]
        out[4] = (I * w_e0 - g2ge) * c[4] + gx * c[2]
    z = -I * g * c[7]
    flow = 2.0 * z.real
    out[5] = flow - g1ef * c[5]
    out[6] = -flow - kappa * c[6]
    out[7] = I * gc * (c[6] - c[5]) - (0.5 * kappa + g2ef + I * d) * c[7]
    out[8] = kappa * c[6] + g1ge * c[9]
    out[9] = -g1ge * c[9] + g1ef * c[5]


def integrate_coefficients(y0, g_half, stark_half, double t0, double dt, Py_ssize_t n_steps,
                           rates, bint interaction, independent_conjugate=False):
    if independent_conjugate:
        raise NotImplementedError("independent_conjugate is only available in the Python kernel")
    cdef const cplx[::1] gh = np.ascontiguousarray(g_half, dtype=np.complex128)
    cdef const double[::1] sh = np.ascontiguousarray(stark_half, dtype=np.float64)
    cdef const double[::1] rr = np.ascontiguousarray(rates, dtype=np.float64)
    if gh.shape[0] < 2 * n_steps + 1 or sh.shape[0] < 2 * n_steps + 1:
        raise ValueError("half-step samples too short")
    out_arr = np.empty((n_steps + 1, 10), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef cplx y[10]
    cdef cplx tmp[10]
    cdef cplx k1[10]
    cdef cplx k2[10]
    cdef cplx k3[10]
    cdef cplx k4[10]
    cdef Py_ssize_t k, i
    cdef double t, h = dt
    y0a = np.asarray(y0, dtype=np.complex128)
    for i in range(10):
        y[i] = y0a[i]
        out[0, i] = y[i]
    with nogil:
        for k in range(n_steps):
            t = t0 + k * h
            deriv(t, y, gh[2 * k], sh[2 * k], &rr[0], interaction, k1)
            for i in range(10):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            deriv(t + 0.5 * h, tmp, gh[2 * k + 1], sh[2 * k + 1], &rr[0], interaction, k2)
            for i in range(10):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            deriv(t + 0.5 * h, tmp, gh[2 * k + 1], sh[2 * k + 1], &rr[0], interaction, k3)
            for i in range(10):
                tmp[i] = y[i] + h * k3[i]
            deriv(t + h, tmp, gh[2 * k + 2], sh[2 * k + 2], &rr[0], interaction, k4)
            for i in range(10):
                y[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                out[k + 1, i] = y[i]
    return out_arr
