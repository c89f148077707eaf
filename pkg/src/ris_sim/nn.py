"""Minimal dense-network core with hand-written backpropagation.

Fully connected stacks of any depth (the actor and critic use two hidden
layers) with tanh hidden activations, per-feature batch normalization on
the hidden layers, an optional side input concatenated at a chosen layer
(the critic takes the action there), Adam with an exponentially decaying
step size, and a running-moment input standardizer.  Everything runs on
float64 numpy arrays; there is no autograd and no external ML dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

_MAGIC = b"DNET1\n"


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ValueError(f"expected a vector or a batch of vectors, got shape {x.shape}")


@dataclass
class _Layer:
    W: np.ndarray
    b: np.ndarray
    bn: bool
    act: str  # "tanh" or "linear"
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    run_mean: np.ndarray | None = None
    run_var: np.ndarray | None = None


class DenseNet:
    """Fully connected network ``dims[0] -> dims[1] -> ... -> dims[-1]``.

    All layers except the last are hidden layers: affine, then batch
    normalization, then tanh.  The output layer is affine with either a
    tanh head (``head="tanh"``, bounded outputs) or no activation
    (``head="linear"``).  If ``aux_layer`` is set, a second input of
    width ``aux_dim`` is concatenated to that layer's input on every
    forward pass.

    Weights start uniform on +/- 1/sqrt(fan_in), biases at zero, batch
    norm at the identity transform.
    """

    def __init__(self, dims, head="linear", aux_dim=0, aux_layer=None,
                 bn_momentum=0.99, bn_eps=1e-8, rng=None):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2:
            raise ValueError("need at least input and output dimensions")
        if head not in ("tanh", "linear"):
            raise ValueError(f"unknown head {head!r}")
        if (aux_layer is None) != (aux_dim == 0):
            raise ValueError("aux_dim and aux_layer must be set together")
        if aux_layer is not None and not (0 < aux_layer < len(dims) - 1):
            raise ValueError("aux_layer must index a non-input layer")
        self.dims = dims
        self.head = head
        self.aux_dim = int(aux_dim)
        self.aux_layer = aux_layer
        self.bn_momentum = float(bn_momentum)
        self.bn_eps = float(bn_eps)
        rng = rng if rng is not None else np.random.default_rng()

        self.layers: list[_Layer] = []
        n_layers = len(dims) - 1
        for i in range(n_layers):
            fan_in = dims[i] + (self.aux_dim if i == aux_layer else 0)
            fan_out = dims[i + 1]
            bound = 1.0 / np.sqrt(fan_in)
            layer = _Layer(
                W=rng.uniform(-bound, bound, size=(fan_in, fan_out)),
                b=np.zeros(fan_out),
                bn=i < n_layers - 1,
                act="tanh" if (i < n_layers - 1 or head == "tanh") else "linear",
            )
            if layer.bn:
                layer.gamma = np.ones(fan_out)
                layer.beta = np.zeros(fan_out)
                layer.run_mean = np.zeros(fan_out)
                layer.run_var = np.ones(fan_out)
            self.layers.append(layer)

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    # ------------------------------------------------------------------
    def forward(self, x, aux=None, train=False, want_cache=False):
        """Run the network.

        ``train=True`` normalizes with batch statistics and refreshes the
        running moments; ``train=False`` uses the stored running moments.
        Returns the output, plus a cache for :meth:`backward` when
        ``want_cache`` is set.  1-D inputs give 1-D outputs.
        """
        h, squeeze = _as_batch(x)
        if h.shape[1] != self.dims[0]:
            raise ValueError(f"input width {h.shape[1]} != expected {self.dims[0]}")
        if (aux is None) != (self.aux_layer is None):
            raise ValueError("aux input must be given exactly when the net expects one")
        cache = [] if want_cache else None
        for i, ly in enumerate(self.layers):
            if i == self.aux_layer:
                a2, _ = _as_batch(aux)
                if a2.shape != (h.shape[0], self.aux_dim):
                    raise ValueError(
                        f"aux must have shape ({h.shape[0]}, {self.aux_dim}), got {a2.shape}"
                    )
                h = np.concatenate([h, a2], axis=1)
            z = h @ ly.W + ly.b
            if ly.bn:
                if train:
                    mean = z.mean(axis=0)
                    var = z.var(axis=0)
                    m = self.bn_momentum
                    ly.run_mean = m * ly.run_mean + (1.0 - m) * mean
                    ly.run_var = m * ly.run_var + (1.0 - m) * var
                else:
                    mean, var = ly.run_mean, ly.run_var
                inv_std = 1.0 / np.sqrt(var + self.bn_eps)
                xhat = (z - mean) * inv_std
                u = ly.gamma * xhat + ly.beta
            else:
                xhat, inv_std = None, None
                u = z
            out = np.tanh(u) if ly.act == "tanh" else u
            if want_cache:
                cache.append((h, xhat, inv_std, out, train))
            h = out
        y = h[0] if squeeze else h
        return (y, cache) if want_cache else y

    def backward(self, cache, output_grad):
        """Exact gradients of a scalar loss from its output gradient.

        ``cache`` must come from the matching :meth:`forward` call.
        Returns ``(param_grads, input_grad, aux_grad)`` where
        ``param_grads`` aligns with :meth:`parameters`.
        """
        if cache is None or len(cache) != len(self.layers):
            raise ValueError("cache does not match this network")
        dh, squeeze = _as_batch(output_grad)
        if dh.shape[1] != self.dims[-1]:
            raise ValueError(f"output grad width {dh.shape[1]} != {self.dims[-1]}")
        per_layer = [None] * len(self.layers)
        daux = None
        for i in reversed(range(len(self.layers))):
            ly = self.layers[i]
            h_in, xhat, inv_std, out, trained = cache[i]
            if h_in.shape[1] != ly.W.shape[0] or dh.shape[0] != h_in.shape[0]:
                raise ValueError("stale cache: shapes do not match the network")
            du = dh * (1.0 - out * out) if ly.act == "tanh" else dh
            if ly.bn:
                dgamma = (du * xhat).sum(axis=0)
                dbeta = du.sum(axis=0)
                dxhat = du * ly.gamma
                if trained:
                    # gradient through the batch statistics
                    B = xhat.shape[0]
                    dz = (inv_std / B) * (
                        B * dxhat
                        - dxhat.sum(axis=0)
                        - xhat * (dxhat * xhat).sum(axis=0)
                    )
                else:
                    dz = dxhat * inv_std
                per_layer[i] = [h_in.T @ dz, dz.sum(axis=0), dgamma, dbeta]
            else:
                dz = du
                per_layer[i] = [h_in.T @ dz, dz.sum(axis=0)]
            dh = dz @ ly.W.T
            if i == self.aux_layer:
                daux = dh[:, -self.aux_dim:]
                dh = dh[:, :-self.aux_dim]
        grads = [g for layer in per_layer for g in layer]
        if squeeze:
            dh = dh[0]
            daux = None if daux is None else daux[0]
        return grads, dh, daux

    # ------------------------------------------------------------------
    def parameters(self) -> list[np.ndarray]:
        """Trainable tensors, in a fixed order shared with backward()."""
        out = []
        for ly in self.layers:
            out.extend([ly.W, ly.b])
            if ly.bn:
                out.extend([ly.gamma, ly.beta])
        return out

    def state_arrays(self) -> list[np.ndarray]:
        """Trainable tensors plus batch-norm running moments."""
        out = []
        for ly in self.layers:
            out.extend([ly.W, ly.b])
            if ly.bn:
                out.extend([ly.gamma, ly.beta, ly.run_mean, ly.run_var])
        return out

    def blend_from(self, other: "DenseNet", tau: float) -> None:
        """In-place soft update ``self <- tau * other + (1 - tau) * self``,
        running moments included."""
        for mine, theirs in zip(self.state_arrays(), other.state_arrays()):
            mine *= 1.0 - tau
            mine += tau * theirs

    def clone(self) -> "DenseNet":
        twin = DenseNet(self.dims, head=self.head, aux_dim=self.aux_dim,
                        aux_layer=self.aux_layer, bn_momentum=self.bn_momentum,
                        bn_eps=self.bn_eps, rng=np.random.default_rng(0))
        twin.blend_from(self, 1.0)
        return twin

    # ------------------------------------------------------------------
    def _tensor_items(self):
        for i, ly in enumerate(self.layers):
            yield f"layer{i}.W", ly.W
            yield f"layer{i}.b", ly.b
            if ly.bn:
                yield f"layer{i}.gamma", ly.gamma
                yield f"layer{i}.beta", ly.beta
                yield f"layer{i}.run_mean", ly.run_mean
                yield f"layer{i}.run_var", ly.run_var

    def save(self, path) -> None:
        """Checkpoint: magic line, one JSON header line listing tensor
        names and shapes, then the raw little-endian float64 buffers in
        header order.  Round-trips bit for bit."""
        header = {
            "dims": list(self.dims),
            "head": self.head,
            "aux_dim": self.aux_dim,
            "aux_layer": self.aux_layer,
            "bn_momentum": self.bn_momentum,
            "bn_eps": self.bn_eps,
            "tensors": [
                {"name": name, "shape": list(arr.shape)}
                for name, arr in self._tensor_items()
            ],
        }
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
            f.write(b"\n")
            for _, arr in self._tensor_items():
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path, "rb") as f:
            if f.read(len(_MAGIC)) != _MAGIC:
                raise ValueError(f"{path}: not a network checkpoint")
            header = json.loads(f.readline().decode("utf-8"))
            net = cls(header["dims"], head=header["head"],
                      aux_dim=header["aux_dim"], aux_layer=header["aux_layer"],
                      bn_momentum=header["bn_momentum"], bn_eps=header["bn_eps"],
                      rng=np.random.default_rng(0))
            arrays = dict(net._tensor_items())
            for spec in header["tensors"]:
                arr = arrays[spec["name"]]
                if list(arr.shape) != spec["shape"]:
                    raise ValueError(f"{path}: shape mismatch for {spec['name']}")
                buf = f.read(arr.size * 8)
                arr[...] = np.frombuffer(buf, dtype="<f8").reshape(arr.shape)
        return net


# ----------------------------------------------------------------------
@dataclass
class AdamState:
    """Adam accumulators for one parameter list, with a decaying step size
    ``lr(t) = base_lr * (1 - decay)**t``."""

    base_lr: float = 1e-3
    decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    scratch: list = field(default_factory=list, repr=False)

    @classmethod
    def for_params(cls, params, base_lr=1e-3, decay=0.0, **kw) -> "AdamState":
        opt = cls(base_lr=base_lr, decay=decay, **kw)
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
        opt.scratch = [np.zeros_like(p) for p in params]
        return opt


def lr_current(opt: AdamState, t: int) -> float:
    """Step size after ``t`` completed updates: ``base_lr * (1 - decay)**t``."""
    if t < 0:
        raise ValueError("step index must be >= 0")
    return opt.base_lr * (1.0 - opt.decay) ** t


def adam_step(params, grads, opt: AdamState):
    """One bias-corrected Adam update, in place.  A zero gradient leaves
    both the parameters and the moments untouched.

    The bias corrections are folded into a single step factor,
    ``p -= lr * sqrt(c2)/c1 * m / (sqrt(v) + eps * sqrt(c2))`` with
    ``c_i = 1 - beta_i**t``, which equals the textbook update and runs
    without temporary allocations.
    """
    if len(params) != len(opt.m) or len(params) != len(grads):
        raise ValueError("parameter/gradient/moment lists are misaligned")
    lr = lr_current(opt, opt.step)
    opt.step += 1
    c1 = 1.0 - opt.beta1 ** opt.step
    sq_c2 = np.sqrt(1.0 - opt.beta2 ** opt.step)
    alpha = lr * sq_c2 / c1
    shift = opt.epsilon * sq_c2
    for p, g, m, v, s in zip(params, grads, opt.m, opt.v, opt.scratch):
        np.multiply(m, opt.beta1, out=m)
        np.multiply(g, 1.0 - opt.beta1, out=s)
        np.add(m, s, out=m)
        np.multiply(g, g, out=s)
        np.multiply(s, 1.0 - opt.beta2, out=s)
        np.multiply(v, opt.beta2, out=v)
        np.add(v, s, out=v)
        np.sqrt(v, out=s)
        np.add(s, shift, out=s)
        np.divide(m, s, out=s)
        np.multiply(s, alpha, out=s)
        np.subtract(p, s, out=p)
    return params


# ----------------------------------------------------------------------
class Whitener:
    """Per-feature standardizer driven by running moments.

    ``apply(x, update=True)`` first folds the sample into the exponential
    moving averages (momentum 0.99), then standardizes.  The very first
    sample defines the mean, so it maps to the zero vector; a constant
    feature keeps zero variance and is flattened to zero by the epsilon
    guard.
    """

    def __init__(self, dim: int, momentum: float = 0.99, eps: float = 1e-8):
        self.dim = int(dim)
        self.momentum = float(momentum)
        self.eps = float(eps)
        self.mean = np.zeros(self.dim)
        self.var = np.zeros(self.dim)
        self.count = 0

    def apply(self, x: np.ndarray, update: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected feature width {self.dim}, got {x.shape[-1]}")
        if update:
            if x.ndim != 1:
                raise ValueError("moment updates take one sample at a time")
            if self.count == 0:
                self.mean = x.copy()
            else:
                delta = x - self.mean
                self.mean = self.mean + (1.0 - self.momentum) * delta
                self.var = self.momentum * self.var + (1.0 - self.momentum) * delta * delta
            self.count += 1
        return (x - self.mean) / np.sqrt(self.var + self.eps)

    def state_arrays(self) -> list[np.ndarray]:
        return [self.mean, self.var]
