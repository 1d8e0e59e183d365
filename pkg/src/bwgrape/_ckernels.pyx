# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: propagator chains and period gradients."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


cdef inline void _matmul(const cplx[:, ::1] a, const cplx[:, ::1] b, cplx[:, ::1] out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef cplx s
    for i in range(d):
        for j in range(d):
            s = 0
            for k in range(d):
                s = s + a[i, k] * b[k, j]
            out[i, j] = s


cdef inline void _adj_matmul(const cplx[:, ::1] a, const cplx[:, ::1] b, cplx[:, ::1] out, Py_ssize_t d) noexcept nogil:
    # out = a^H @ b
    cdef Py_ssize_t i, j, k
    cdef cplx s, c
    for i in range(d):
        for j in range(d):
            s = 0
            for k in range(d):
                c = a[k, i]
                s = s + (c.real - 1j * c.imag) * b[k, j]
            out[i, j] = s


def propagator_chains(steps, u_desired):
    cdef const cplx[:, :, :, ::1] sv = np.ascontiguousarray(steps, dtype=np.complex128)
    cdef const cplx[:, ::1] ud = np.ascontiguousarray(u_desired, dtype=np.complex128)
    cdef Py_ssize_t nb = sv.shape[0], nm = sv.shape[1], d = sv.shape[2]
    forward_arr = np.empty((nb, nm, d, d), dtype=np.complex128)
    backward_arr = np.empty((nb, nm, d, d), dtype=np.complex128)
    cdef cplx[:, :, :, ::1] fw = forward_arr
    cdef cplx[:, :, :, ::1] bw = backward_arr
    cdef Py_ssize_t b, m, i, j
    with nogil:
        for b in range(nb):
            for i in range(d):
                for j in range(d):
                    fw[b, 0, i, j] = sv[b, 0, i, j]
                    bw[b, nm - 1, i, j] = ud[i, j]
            for m in range(1, nm):
                _matmul(sv[b, m], fw[b, m - 1], fw[b, m], d)
            for m in range(nm - 1, 0, -1):
                _adj_matmul(sv[b, m], bw[b, m], bw[b, m - 1], d)
    return forward_arr, backward_arr


def period_gradients(forward, backward, controls, double tau):
    cdef const cplx[:, :, :, ::1] fw = np.ascontiguousarray(forward, dtype=np.complex128)
    cdef const cplx[:, :, :, ::1] bw = np.ascontiguousarray(backward, dtype=np.complex128)
    cdef const cplx[:, :, :, ::1] hk = np.ascontiguousarray(controls, dtype=np.complex128)
    cdef Py_ssize_t nb = fw.shape[0], nm = fw.shape[1], d = fw.shape[2], nk = hk.shape[1]
    out = np.empty((nb, nk, nm), dtype=np.float64)
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t b, m, k, i, j, l
    cdef cplx xp, phx, hx, p, x
    cdef double inv_d = 1.0 / d
    with nogil:
        for b in range(nb):
            for m in range(nm):
                xp = 0
                for i in range(d):
                    for j in range(d):
                        x = fw[b, m, i, j]
                        xp = xp + (x.real - 1j * x.imag) * bw[b, m, i, j]
                xp = xp * inv_d
                for k in range(nk):
                    phx = 0
                    for i in range(d):
                        for l in range(d):
                            hx = 0
                            for j in range(d):
                                hx = hx + hk[b, k, i, j] * fw[b, m, j, l]
                            p = bw[b, m, i, l]
                            phx = phx + (p.real - 1j * p.imag) * hx
                    phx = phx * inv_d
                    ov[b, k, m] = -2.0 * (1j * tau * phx * xp).real
    return out
