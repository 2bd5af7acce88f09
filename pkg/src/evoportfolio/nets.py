"""Minimal dense-network engine for actor/critic training.

Networks are plain MLPs: each hidden layer is an affine map followed by
layer normalization (with learned gain/offset) and an ELU nonlinearity;
the output layer is affine followed by an optional tanh squash (used by
actors; critics leave the output linear).

All parameters of a network live in one flat float64 vector.  The flat
order is documented and stable: layer by layer, weight matrix in row-major
order, then bias, then (hidden layers only) norm gain, then norm offset.
Genome-level operators (crossover cut points, checkpoints, soft target
blending, Adam) all work directly on this vector.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError, NumericError, ShapeError, StateError

LN_EPS = 1e-5

_SQUASH_CODES = {"identity": 0, "tanh": 1}
_SQUASH_NAMES = {v: k for k, v in _SQUASH_CODES.items()}

_CKPT_MAGIC = b"EVPN"
_CKPT_VERSION = 1


def elu(x):
    """ELU with alpha=1: x for x>0, exp(x)-1 otherwise."""
    # expm1 argument clamped so the unused branch cannot overflow.
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def layer_norm(x, gain, offset, eps=LN_EPS):
    """Normalize a vector to zero mean / unit variance, then apply gain and offset.

    Requires length >= 2: variance of a single element is identically zero
    and the result would be dominated by the stabilizing epsilon.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise ConfigError("layer_norm requires vectors of length >= 2")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return gain * (xc / np.sqrt(var + eps)) + offset


class MlpParams:
    """Parameters of one dense network, backed by a single flat vector.

    dims is the full unit count per stage, e.g. [4, 64, 64, 2].  Hidden
    layers carry norm gain/offset; the output layer does not (a width-1
    critic output makes normalization there undefined).
    """

    def __init__(self, dims, squash="tanh", rng=None, flat=None):
        dims = [int(d) for d in dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ConfigError(f"invalid network dims {dims}")
        if any(d < 2 for d in dims[1:-1]):
            raise ConfigError(f"hidden widths must be >= 2 for layer norm, got {dims}")
        if squash not in _SQUASH_CODES:
            raise ConfigError(f"unknown output squash {squash!r}")
        self.dims = dims
        self.squash = squash
        self.n_layers = len(dims) - 1

        # Slice table over the flat vector, in the documented order.
        self._slices = []
        pos = 0
        for li in range(self.n_layers):
            nin, nout = dims[li], dims[li + 1]
            hidden = li < self.n_layers - 1
            w = (pos, pos + nin * nout, (nin, nout))
            pos = w[1]
            b = (pos, pos + nout)
            pos = b[1]
            if hidden:
                g = (pos, pos + nout)
                pos = g[1]
                o = (pos, pos + nout)
                pos = o[1]
            else:
                g = o = None
            self._slices.append((w, b, g, o))
        self.n_params = pos

        if flat is not None:
            flat = np.ascontiguousarray(flat, dtype=np.float64)
            if flat.shape != (self.n_params,):
                raise ShapeError(
                    f"flat vector has {flat.shape[0]} entries, expected {self.n_params}"
                )
            self.flat = flat
        else:
            self.flat = np.zeros(self.n_params)
        self.layers = self.view(self.flat)
        # Bumped by every in-place parameter update; lets tapes detect staleness.
        self.version = 0
        if rng is not None:
            self.init_random(rng)

    def view(self, flat):
        """Per-layer (W, b, gain, offset) views into a same-sized flat vector."""
        out = []
        for (w0, w1, wshape), (b0, b1), g, o in self._slices:
            W = flat[w0:w1].reshape(wshape)
            b = flat[b0:b1]
            gain = flat[g[0]:g[1]] if g else None
            off = flat[o[0]:o[1]] if o else None
            out.append((W, b, gain, off))
        return out

    def init_random(self, rng):
        """Fan-in scaled normal weights, zero bias, identity norm."""
        for W, b, g, o in self.layers:
            W[:] = rng.normal(0.0, 1.0 / np.sqrt(W.shape[0]), W.shape)
            b[:] = 0.0
            if g is not None:
                g[:] = 1.0
                o[:] = 0.0
        self.version += 1
        return self

    def same_architecture(self, other):
        return self.dims == other.dims and self.squash == other.squash

    def copy(self):
        return MlpParams(self.dims, self.squash, flat=self.flat.copy())

    def copy_from(self, other):
        """Overwrite parameters in place with another network's values."""
        if not self.same_architecture(other):
            raise ShapeError(f"architecture mismatch: {self.dims} vs {other.dims}")
        self.flat[:] = other.flat
        self.version += 1

    def check_finite(self):
        if not np.isfinite(self.flat).all():
            raise NumericError("network parameters contain non-finite values")


class GradientTape:
    """Forward intermediates of one batch, enough for an exact backward pass."""

    def __init__(self, params, x, records, y):
        self.params = params
        self.version = params.version
        self.x = x
        self.records = records  # per hidden layer: (x_in, xhat, invstd, h)
        self.y = y


def forward(params, batch, need_tape=True):
    """Run the network on a (T, in_dim) batch.

    Returns (output, tape); tape is None when need_tape is False (cheap
    rollout path).  Output is (T, out_dim), post-squash.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.dims[0]:
        raise ShapeError(
            f"batch shape {x.shape} incompatible with input dim {params.dims[0]}"
        )
    if not np.isfinite(x).all():
        raise NumericError("non-finite values in network input")

    records = [] if need_tape else None
    h = x
    for li, (W, b, g, o) in enumerate(params.layers):
        z = h @ W
        z += b
        if li < params.n_layers - 1:
            n = z.shape[1]
            mu = z.mean(axis=1, keepdims=True)
            z -= mu
            var = np.einsum("ij,ij->i", z, z)[:, None]
            var /= n
            var += LN_EPS
            invstd = 1.0 / np.sqrt(var)
            z *= invstd
            xhat = z
            a = xhat * g
            a += o
            # ELU(a) = max(a, 0) + expm1(min(a, 0)), branch-free.
            neg = np.minimum(a, 0.0)
            np.expm1(neg, out=neg)
            nh = np.maximum(a, 0.0)
            nh += neg
            if need_tape:
                records.append((h, xhat, invstd, a, nh))
            h = nh
        else:
            if params.squash == "tanh":
                y = np.tanh(z)
            else:
                y = z
            if need_tape:
                return y, GradientTape(params, x, records, y)
            return y, None
    raise AssertionError("unreachable")


def backward(tape, output_grad):
    """Exact reverse pass over a tape.

    output_grad has the forward output's shape.  Returns (flat parameter
    gradient, input gradient); the flat gradient shares the parameter
    vector's documented layout.
    """
    params = tape.params
    if tape.version != params.version:
        raise StateError("gradient tape is stale; parameters changed since forward")
    dy = np.asarray(output_grad, dtype=np.float64)
    if dy.shape != tape.y.shape:
        raise ShapeError(f"output_grad shape {dy.shape} != output shape {tape.y.shape}")

    gflat = np.zeros(params.n_params)
    gviews = params.view(gflat)

    # Output layer.
    W, b, _, _ = params.layers[-1]
    gW, gb, _, _ = gviews[-1]
    if params.squash == "tanh":
        dz = 1.0 - tape.y * tape.y
        dz *= dy
    else:
        dz = dy
    x_in = tape.records[-1][4] if tape.records else tape.x
    np.dot(x_in.T, dz, out=gW)
    gb[:] = dz.sum(axis=0)
    dx = dz @ W.T

    # Hidden layers in reverse.
    for li in range(params.n_layers - 2, -1, -1):
        x_in, xhat, invstd, a, h = tape.records[li]
        W, b, g, o = params.layers[li]
        gW, gb, gg, go = gviews[li]
        n = xhat.shape[1]
        # ELU': 1 for a>0 else exp(a) = h+1.
        da = dx * np.where(a > 0, 1.0, h + 1.0)
        np.einsum("ij,ij->j", da, xhat, out=gg)
        go[:] = da.sum(axis=0)
        da *= g
        dxhat = da
        m2 = np.einsum("ij,ij->i", dxhat, xhat)[:, None]
        m2 /= n
        dxhat -= dxhat.mean(axis=1, keepdims=True)
        dxhat -= xhat * m2
        dxhat *= invstd
        dz = dxhat
        np.dot(x_in.T, dz, out=gW)
        gb[:] = dz.sum(axis=0)
        dx = dz @ W.T
    return gflat, dx


class AdamState:
    """Adam moment accumulators for one parameter vector."""

    def __init__(self, n_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(params, grad_flat, state):
    """One Adam update with bias correction, in place."""
    if grad_flat.shape != params.flat.shape:
        raise ShapeError(
            f"gradient length {grad_flat.shape} != parameter length {params.flat.shape}"
        )
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad_flat
    state.v *= b2
    state.v += (1.0 - b2) * (grad_flat * grad_flat)
    mhat = state.m * (1.0 / (1.0 - b1 ** state.t))
    vhat = state.v * (1.0 / (1.0 - b2 ** state.t))
    np.sqrt(vhat, out=vhat)
    vhat += state.eps
    mhat /= vhat
    mhat *= state.lr
    params.flat -= mhat
    params.version += 1


def soft_update(target, source, tau):
    """target <- tau * source + (1 - tau) * target, elementwise."""
    if not target.same_architecture(source):
        raise ShapeError("soft update across different architectures")
    target.flat *= 1.0 - tau
    target.flat += tau * source.flat
    target.version += 1


def save_params(params, path):
    """Serialize to the documented flat binary layout.

    Layout (all little-endian): magic b"EVPN", u32 format version, u8 squash
    code (0 identity / 1 tanh), u32 stage count, u32 per-stage unit counts,
    then the flat parameter vector as f64 in the documented flat order.
    """
    header = struct.pack(
        "<4sIBI", _CKPT_MAGIC, _CKPT_VERSION, _SQUASH_CODES[params.squash],
        len(params.dims),
    )
    dims = struct.pack(f"<{len(params.dims)}I", *params.dims)
    with open(path, "wb") as f:
        f.write(header)
        f.write(dims)
        f.write(params.flat.astype("<f8").tobytes())


def load_params(path):
    """Read a checkpoint written by save_params."""
    with open(path, "rb") as f:
        raw = f.read()
    head = struct.calcsize("<4sIBI")
    if len(raw) < head:
        raise ValueError(f"{path}: truncated checkpoint")
    magic, version, squash_code, n_dims = struct.unpack_from("<4sIBI", raw)
    if magic != _CKPT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if squash_code not in _SQUASH_NAMES:
        raise ValueError(f"{path}: unknown squash code {squash_code}")
    dims = struct.unpack_from(f"<{n_dims}I", raw, head)
    body = head + struct.calcsize(f"<{n_dims}I")
    flat = np.frombuffer(raw, dtype="<f8", offset=body).astype(np.float64)
    params = MlpParams(dims, _SQUASH_NAMES[squash_code], flat=flat)
    params.check_finite()
    return params
