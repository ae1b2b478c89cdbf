"""Pure-numpy implementations of the single-state MLP kernels.

This is the fallback backend used when the compiled extension is not
available.  The compiled core in ``_core.pyx`` must keep the exact same
semantics: ReLU hidden layers, linear output head, ReLU subgradient 0 at 0.
"""
import numpy as np

_LOG_2PI = 1.8378770664093453


def mlp_forward(theta, w_offs, b_offs, in_dims, out_dims, x):
    """Forward pass of a ReLU MLP stored as a flat parameter vector.

    Layer l occupies theta[w_offs[l] : w_offs[l] + out*in] (row-major weight
    matrix of shape (out, in)) followed by theta[b_offs[l] : b_offs[l] + out].
    All layers except the last apply ReLU.
    """
    last = len(in_dims) - 1
    h = x
    for l in range(last + 1):
        n_in = in_dims[l]
        n_out = out_dims[l]
        w = theta[w_offs[l] : w_offs[l] + n_out * n_in].reshape(n_out, n_in)
        b = theta[b_offs[l] : b_offs[l] + n_out]
        z = w @ h + b
        h = np.maximum(z, 0.0) if l < last else z
    return h


def mlp_state_grad(theta, w_offs, b_offs, in_dims, out_dims, log_std, s, a):
    """Gradient of -log N(a; mlp(s), diag(exp(2*log_std))) with respect to s.

    Fused forward + reverse pass.  Returns (nll, grad) where nll is the
    negative log density and grad has the same length as s.
    """
    last = len(in_dims) - 1
    hs = [np.asarray(s, dtype=np.float64)]
    h = hs[0]
    for l in range(last + 1):
        n_in = in_dims[l]
        n_out = out_dims[l]
        w = theta[w_offs[l] : w_offs[l] + n_out * n_in].reshape(n_out, n_in)
        b = theta[b_offs[l] : b_offs[l] + n_out]
        z = w @ h + b
        h = np.maximum(z, 0.0) if l < last else z
        hs.append(h)

    mu = hs[-1]
    inv_var = np.exp(-2.0 * log_std)
    resid = a - mu
    nll = 0.5 * float(np.dot(resid * resid, inv_var)) + float(np.sum(log_std)) \
        + 0.5 * len(mu) * _LOG_2PI

    # d nll / d mu = (mu - a) / sigma^2, then backpropagate to the input.
    delta = (mu - a) * inv_var
    for l in range(last, -1, -1):
        n_in = in_dims[l]
        n_out = out_dims[l]
        w = theta[w_offs[l] : w_offs[l] + n_out * n_in].reshape(n_out, n_in)
        delta = w.T @ delta
        if l > 0:
            # post-activation > 0 iff pre-activation > 0; at exactly 0 the
            # subgradient is taken as 0
            delta = np.where(hs[l] > 0.0, delta, 0.0)
    return nll, delta
