# cython: language_level=3
# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled single-state MLP kernels.

Semantics are pinned by the numpy fallback in ``py_backend.py``: ReLU hidden
layers, linear output head, ReLU subgradient 0 at exactly 0.  Plain
sequential loops in double precision keep results deterministic; no
fast-math.
"""
from libc.math cimport exp

import numpy as np

cdef double LOG_2PI = 1.8378770664093453


def mlp_forward(const double[::1] theta, const long[::1] w_offs, const long[::1] b_offs,
                const long[::1] in_dims, const long[::1] out_dims, const double[::1] x):
    cdef Py_ssize_t n_layers = in_dims.shape[0]
    cdef Py_ssize_t last = n_layers - 1
    cdef Py_ssize_t max_w = x.shape[0]
    cdef Py_ssize_t l, i, j
    cdef long w0, b0, n_in, n_out
    cdef double acc

    for l in range(n_layers):
        if out_dims[l] > max_w:
            max_w = out_dims[l]

    buf_a = np.empty(max_w, dtype=np.float64)
    buf_b = np.empty(max_w, dtype=np.float64)
    cdef double[::1] cur = buf_a
    cdef double[::1] nxt = buf_b
    cdef double[::1] tmp

    for i in range(x.shape[0]):
        cur[i] = x[i]

    for l in range(n_layers):
        w0 = w_offs[l]
        b0 = b_offs[l]
        n_in = in_dims[l]
        n_out = out_dims[l]
        for j in range(n_out):
            acc = theta[b0 + j]
            for i in range(n_in):
                acc += theta[w0 + j * n_in + i] * cur[i]
            if l < last and acc < 0.0:
                acc = 0.0
            nxt[j] = acc
        tmp = cur
        cur = nxt
        nxt = tmp

    out = np.empty(out_dims[last], dtype=np.float64)
    cdef double[::1] out_v = out
    for j in range(out_dims[last]):
        out_v[j] = cur[j]
    return out


def mlp_state_grad(const double[::1] theta, const long[::1] w_offs, const long[::1] b_offs,
                   const long[::1] in_dims, const long[::1] out_dims,
                   const double[::1] log_std, const double[::1] s, const double[::1] a):
    cdef Py_ssize_t n_layers = in_dims.shape[0]
    cdef Py_ssize_t last = n_layers - 1
    cdef Py_ssize_t max_w = s.shape[0]
    cdef Py_ssize_t l, i, j
    cdef long w0, b0, n_in, n_out
    cdef double acc, inv_var, resid, nll

    for l in range(n_layers):
        if out_dims[l] > max_w:
            max_w = out_dims[l]

    # activations per layer (row 0 is the input) for the reverse pass
    acts_arr = np.empty((n_layers + 1, max_w), dtype=np.float64)
    cdef double[:, ::1] acts = acts_arr
    buf_a = np.empty(max_w, dtype=np.float64)
    buf_b = np.empty(max_w, dtype=np.float64)
    cdef double[::1] delta = buf_a
    cdef double[::1] prev = buf_b
    cdef double[::1] tmp

    for i in range(s.shape[0]):
        acts[0, i] = s[i]

    for l in range(n_layers):
        w0 = w_offs[l]
        b0 = b_offs[l]
        n_in = in_dims[l]
        n_out = out_dims[l]
        for j in range(n_out):
            acc = theta[b0 + j]
            for i in range(n_in):
                acc += theta[w0 + j * n_in + i] * acts[l, i]
            if l < last and acc < 0.0:
                acc = 0.0
            acts[l + 1, j] = acc

    nll = 0.0
    n_out = out_dims[last]
    for j in range(n_out):
        inv_var = exp(-2.0 * log_std[j])
        resid = a[j] - acts[n_layers, j]
        nll += 0.5 * resid * resid * inv_var + log_std[j]
        delta[j] = -resid * inv_var
    nll += 0.5 * n_out * LOG_2PI

    for l in range(last, -1, -1):
        w0 = w_offs[l]
        n_in = in_dims[l]
        n_out = out_dims[l]
        for i in range(n_in):
            acc = 0.0
            for j in range(n_out):
                acc += theta[w0 + j * n_in + i] * delta[j]
            if l > 0 and acts[l, i] <= 0.0:
                acc = 0.0
            prev[i] = acc
        tmp = delta
        delta = prev
        prev = tmp

    grad = np.empty(s.shape[0], dtype=np.float64)
    cdef double[::1] grad_v = grad
    for i in range(s.shape[0]):
        grad_v[i] = delta[i]
    return nll, grad
