"""Minimal hand-rolled network substrate: dense layers, pointwise activations,
max pooling over points, Adam, and a central-difference gradient checker.

There is no autodiff graph. Every layer caches what its hand-written backward
rule needs; `MLP` chains layers and exposes forward/backward/params. Training
runs in float32; `astype(np.float64)` clones a network for gradient checks.

A Dense layer applied to a (..., N, C) array acts independently on every
point row, i.e. it is the kernel-size-1 ("pointwise") convolution.
"""

from __future__ import annotations

import copy

import numpy as np


class Param:
    """Named parameter array plus its accumulated gradient."""

    __slots__ = ("name", "values", "grad")

    def __init__(self, name: str, values: np.ndarray):
        self.name = name
        self.values = values
        self.grad = np.zeros_like(values)

    @property
    def shape(self):
        return self.values.shape

    def astype(self, dtype) -> "Param":
        p = Param(self.name, self.values.astype(dtype))
        p.grad = self.grad.astype(dtype)
        return p


def glorot_uniform(rng, n_in: int, n_out: int, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype)


class Dense:
    """y = x @ W + b over the last axis; broadcasts across leading axes."""

    def __init__(self, n_in, n_out, rng, name="dense", dtype=np.float32, bias=True):
        self.name = name
        self.w = Param(f"{name}.w", glorot_uniform(rng, n_in, n_out, dtype))
        self.b = Param(f"{name}.b", np.zeros(n_out, dtype=dtype)) if bias else None
        self._x = None

    def params(self):
        return [self.w] if self.b is None else [self.w, self.b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.w.shape[0]:
            raise ValueError(
                f"{self.name}: input shape {x.shape} does not match weight shape {self.w.shape}"
            )
        self._x = x
        y = x @ self.w.values
        if self.b is not None:
            y += self.b.values
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._x
        xf = x.reshape(-1, x.shape[-1])
        dyf = dy.reshape(-1, dy.shape[-1])
        self.w.grad += xf.T @ dyf
        if self.b is not None:
            self.b.grad += dyf.sum(axis=0)
        return dy @ self.w.values.T

    def input_grad(self, dy: np.ndarray) -> np.ndarray:
        """Backward to the input only; parameter gradients untouched."""
        return dy @ self.w.values.T

    def astype(self, dtype) -> "Dense":
        out = copy.copy(self)
        out.w = self.w.astype(dtype)
        out.b = None if self.b is None else self.b.astype(dtype)
        out._x = None
        return out


class ReLU:
    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x):
        self._mask = x > 0
        return np.maximum(x, x.dtype.type(0))

    def backward(self, dy):
        return dy * self._mask

    input_grad = backward

    def astype(self, dtype):
        return ReLU()


class Tanh:
    def __init__(self):
        self._y = None

    def params(self):
        return []

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y * self._y)

    input_grad = backward

    def astype(self, dtype):
        return Tanh()


class MaxPoolPoints:
    """Elementwise max over the point axis: (..., N, C) -> (..., C).

    Permutation invariant by construction. Backward routes the gradient to
    the argmax row per channel; ties go to the lowest point index (argmax
    returns the first maximum).
    """

    def __init__(self):
        self._arg = None
        self._shape = None

    def params(self):
        return []

    def forward(self, x):
        if x.ndim < 2:
            raise ValueError(f"max pool needs a (..., N, C) array, got shape {x.shape}")
        self._shape = x.shape
        self._arg = x.argmax(axis=-2)
        return np.take_along_axis(x, self._arg[..., None, :], axis=-2).squeeze(-2)

    def backward(self, dy):
        dx = np.zeros(self._shape, dtype=dy.dtype)
        np.put_along_axis(dx, self._arg[..., None, :], dy[..., None, :], axis=-2)
        return dx

    input_grad = backward

    def astype(self, dtype):
        return MaxPoolPoints()


_ACTIVATIONS = {"relu": ReLU, "tanh": Tanh}


class MLP:
    """Stack of Dense layers with a fixed activation pattern.

    `hidden` activates every layer except the last; `output` optionally
    activates the last one ("relu", "tanh", or None for a linear head).
    """

    def __init__(self, sizes, rng, hidden="relu", output=None, name="mlp", dtype=np.float32):
        if len(sizes) < 2:
            raise ValueError("MLP needs at least input and output sizes")
        self.name = name
        self.frozen = False
        self.layers = []
        n_dense = len(sizes) - 1
        for i in range(n_dense):
            self.layers.append(Dense(sizes[i], sizes[i + 1], rng, name=f"{name}.fc{i}", dtype=dtype))
            act = hidden if i < n_dense - 1 else output
            if act is not None:
                self.layers.append(_ACTIVATIONS[act]())

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        if self.frozen:
            raise RuntimeError(f"{self.name} is frozen; backward is not allowed")
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def input_grad(self, dy):
        """Backward to the input using cached activations; no param grads."""
        for layer in reversed(self.layers):
            dy = layer.input_grad(dy)
        return dy

    def double_backward(self, u):
        """Accumulate d(sum_b u_b . g_b)/dparams into the gradients, where
        g_b = dy/dx for sample b of the cached batch (scalar-output stacks).

        Works by a tangent sweep along u followed by its reverse sweep,
        holding the ReLU gates fixed — exact almost everywhere, which is all
        a piecewise-linear stack offers. Only Dense/ReLU layers are allowed;
        a Tanh gate would need the curvature term this rule drops. Requires
        a prior forward() on the batch; returns the directional value
        sum_b u_b . g_b.
        """
        if self.frozen:
            raise RuntimeError(f"{self.name} is frozen; double_backward is not allowed")
        t = u
        tangent_inputs = []
        for layer in self.layers:
            if isinstance(layer, Dense):
                tangent_inputs.append(t)
                t = t @ layer.w.values  # bias drops out of the tangent pass
            elif isinstance(layer, ReLU):
                tangent_inputs.append(None)
                t = t * layer._mask
            else:
                raise TypeError(
                    f"double_backward supports Dense/ReLU stacks only, got {type(layer).__name__}"
                )
        value = float(t.sum())
        r = np.ones_like(t)
        for layer, t_in in zip(reversed(self.layers), reversed(tangent_inputs)):
            if isinstance(layer, Dense):
                layer.w.grad += t_in.reshape(-1, t_in.shape[-1]).T @ r.reshape(-1, r.shape[-1])
                r = r @ layer.w.values.T
            else:
                r = r * layer._mask
        return value

    def freeze(self):
        self.frozen = True
        return self

    def astype(self, dtype) -> "MLP":
        out = copy.copy(self)
        out.layers = [layer.astype(dtype) for layer in self.layers]
        return out

    def state(self) -> dict:
        return {p.name: p.values for p in self.params()}

    def load_state(self, state: dict):
        for p in self.params():
            if p.name not in state:
                raise KeyError(f"missing parameter {p.name!r} in state")
            arr = state[p.name]
            if arr.shape != p.values.shape:
                raise ValueError(
                    f"shape mismatch for {p.name}: checkpoint {arr.shape} vs network {p.values.shape}"
                )
            p.values[...] = arr.astype(p.values.dtype)
        return self


class Adam:
    """Adam with bias correction. A zero gradient leaves parameters untouched."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.values -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad[...] = 0


def sum_loss(y):
    """Default scalar head for gradient checks: loss = sum(y)."""
    return float(np.sum(y)), np.ones_like(y)


def finite_difference_check(net, x, h=1e-5, loss=None, max_checks=None, seed=0):
    """Compare analytic gradients against central finite differences.

    The network is cloned to float64 and `loss(y) -> (value, dL/dy)` supplies
    the scalar head (sum of outputs by default). Both the parameter gradients
    and the input gradient are checked; when a tensor has more than
    `max_checks` elements only a seeded random subset of coordinates is
    probed. Returns a report dict with the max relative error.
    """
    net64 = net.astype(np.float64)
    x64 = np.array(x, dtype=np.float64)  # owned copy: probed in place
    head = loss if loss is not None else sum_loss

    def value():
        return head(net64.forward(x64))[0]

    _, dy = head(net64.forward(x64))
    net64.zero_grad()
    dx = net64.backward(dy)

    rng = np.random.default_rng(seed)
    report = {"max_rel_error": 0.0, "worst": None, "n_checked": 0}

    def probe(arr, grad, label):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            idx = rng.choice(flat.size, size=max_checks, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = value()
            flat[i] = orig - h
            down = value()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            analytic = gflat[i]
            rel = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8)
            report["n_checked"] += 1
            if rel > report["max_rel_error"]:
                report["max_rel_error"] = rel
                report["worst"] = (label, int(i), float(analytic), float(numeric))

    for p in net64.params():
        probe(p.values, p.grad, p.name)
    probe(x64, dx, "input")
    return report
