"""Small numpy neural-net layers with explicit forward and backward passes.

Everything runs in float64 so finite-difference gradient checks hold at
tight tolerances.  Each layer's ``forward`` returns ``(output, cache)`` and
``backward`` consumes that cache, returns the input gradient, and
accumulates parameter gradients into ``.grads`` under the same keys as
``.params``.  Nested layers register children so a whole network can be
walked with ``named_params``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

SQRT_2 = float(np.sqrt(2.0))
INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))

# Stand-in for -inf on masked attention logits; softmax underflows it to an
# exact 0 weight without producing inf-inf NaNs in the backward pass.
MASK_NEG = -1e30


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / SQRT_2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    # d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
    return 0.5 * (1.0 + erf(x / SQRT_2)) + x * np.exp(-0.5 * x * x) * INV_SQRT_2PI


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    """Base: parameter/gradient registry with recursive naming."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._children: dict[str, "Layer"] = {}

    def add_child(self, name: str, child: "Layer") -> "Layer":
        self._children[name] = child
        return child

    def named_params(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {prefix + k: v for k, v in self.params.items()}
        for name, child in self._children.items():
            out.update(child.named_params(prefix + name + "."))
        return out

    def named_grads(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {prefix + k: v for k, v in self.grads.items()}
        for name, child in self._children.items():
            out.update(child.named_grads(prefix + name + "."))
        return out

    def zero_grads(self) -> None:
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)
        for child in self._children.values():
            child.zero_grads()


class Linear(Layer):
    """Affine map over the last axis."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator,
                 weight_scale: float | None = None) -> None:
        super().__init__()
        scale = weight_scale if weight_scale is not None else 1.0 / np.sqrt(d_in)
        self.params["W"] = rng.uniform(-scale, scale, size=(d_in, d_out))
        self.params["b"] = np.zeros(d_out)
        self.zero_grads()

    def forward(self, x: np.ndarray):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        x = cache
        flat_x = x.reshape(-1, x.shape[-1])
        flat_d = dout.reshape(-1, dout.shape[-1])
        self.grads["W"] += flat_x.T @ flat_d
        self.grads["b"] += flat_d.sum(axis=0)
        return dout @ self.params["W"].T


class LayerNorm(Layer):
    """Normalization over the last axis with learned gain and bias."""

    def __init__(self, dim: int, eps: float = 1e-5) -> None:
        super().__init__()
        self.eps = eps
        self.params["g"] = np.ones(dim)
        self.params["b"] = np.zeros(dim)
        self.zero_grads()

    def forward(self, x: np.ndarray):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv_std
        return xhat * self.params["g"] + self.params["b"], (xhat, inv_std)

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        xhat, inv_std = cache
        g = self.params["g"]
        self.grads["g"] += (dout * xhat).sum(axis=tuple(range(dout.ndim - 1)))
        self.grads["b"] += dout.sum(axis=tuple(range(dout.ndim - 1)))
        dxhat = dout * g
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv_std * (dxhat - m1 - xhat * m2)


class PatchConv(Layer):
    """Strided 1-D convolution with kernel == stride (non-overlapping).

    Equivalent to folding k consecutive frames into one vector and applying
    a linear map, so each output frame depends on a disjoint input patch.
    Input (B, L, C_in) -> output (B, L // k, C_out); trailing frames that do
    not fill a whole patch are dropped.
    """

    def __init__(self, kernel: int, c_in: int, c_out: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.kernel = kernel
        self.c_in = c_in
        self.proj = self.add_child("proj", Linear(kernel * c_in, c_out, rng))

    def forward(self, x: np.ndarray):
        b, length, c = x.shape
        l_out = length // self.kernel
        folded = x[:, :l_out * self.kernel, :].reshape(b, l_out, self.kernel * c)
        out, lin_cache = self.proj.forward(folded)
        return out, (lin_cache, x.shape)

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        lin_cache, in_shape = cache
        dfolded = self.proj.backward(dout, lin_cache)
        b, length, c = in_shape
        l_out = dfolded.shape[1]
        dx = np.zeros(in_shape, dtype=np.float64)
        dx[:, :l_out * self.kernel, :] = dfolded.reshape(b, l_out * self.kernel, c)
        return dx


class MultiHeadAttention(Layer):
    """Scaled dot-product self-attention with key masking."""

    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator) -> None:
        super().__init__()
        if dim % n_heads:
            raise ValueError(f"dim {dim} not divisible by n_heads {n_heads}")
        self.n_heads = n_heads
        self.d_head = dim // n_heads
        self.wq = self.add_child("wq", Linear(dim, dim, rng))
        self.wk = self.add_child("wk", Linear(dim, dim, rng))
        self.wv = self.add_child("wv", Linear(dim, dim, rng))
        self.wo = self.add_child("wo", Linear(dim, dim, rng))

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, length, _ = x.shape
        return x.reshape(b, length, self.n_heads, self.d_head).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        b, h, length, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, length, h * dh)

    def forward(self, x: np.ndarray, mask: np.ndarray):
        # mask: (B, L) boolean, True where the frame is real
        q_flat, cq = self.wq.forward(x)
        k_flat, ck = self.wk.forward(x)
        v_flat, cv = self.wv.forward(x)
        q, k, v = self._split(q_flat), self._split(k_flat), self._split(v_flat)
        scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(self.d_head)
        scores = scores + np.where(mask[:, None, None, :], 0.0, MASK_NEG)
        attn = softmax(scores, axis=-1)
        ctx = self._merge(attn @ v)
        out, co = self.wo.forward(ctx)
        return out, (cq, ck, cv, co, q, k, v, attn)

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        cq, ck, cv, co, q, k, v, attn = cache
        dctx = self._split(self.wo.backward(dout, co))
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        # softmax jacobian applied row-wise
        dscores = attn * (dattn - np.sum(dattn * attn, axis=-1, keepdims=True))
        dscores = dscores / np.sqrt(self.d_head)
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        dx = self.wq.backward(self._merge(dq), cq)
        dx = dx + self.wk.backward(self._merge(dk), ck)
        dx = dx + self.wv.backward(self._merge(dv), cv)
        return dx


class TransformerBlock(Layer):
    """Pre-norm block: x + attn(ln1(x)), then x + mlp(ln2(x))."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.ln1 = self.add_child("ln1", LayerNorm(dim))
        self.attn = self.add_child("attn", MultiHeadAttention(dim, n_heads, rng))
        self.ln2 = self.add_child("ln2", LayerNorm(dim))
        self.fc1 = self.add_child("fc1", Linear(dim, mlp_ratio * dim, rng))
        self.fc2 = self.add_child("fc2", Linear(mlp_ratio * dim, dim, rng))

    def forward(self, x: np.ndarray, mask: np.ndarray):
        n1, c_ln1 = self.ln1.forward(x)
        a, c_attn = self.attn.forward(n1, mask)
        x1 = x + a
        n2, c_ln2 = self.ln2.forward(x1)
        h, c_fc1 = self.fc1.forward(n2)
        hg = gelu(h)
        m, c_fc2 = self.fc2.forward(hg)
        x2 = x1 + m
        return x2, (c_ln1, c_attn, c_ln2, c_fc1, h, c_fc2)

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        c_ln1, c_attn, c_ln2, c_fc1, h, c_fc2 = cache
        dhg = self.fc2.backward(dout, c_fc2)
        dh = dhg * gelu_grad(h)
        dn2 = self.fc1.backward(dh, c_fc1)
        dx1 = dout + self.ln2.backward(dn2, c_ln2)
        dn1 = self.attn.backward(dx1, c_attn)
        return dx1 + self.ln1.backward(dn1, c_ln1)


class ConvStage(Layer):
    """PatchConv followed by LayerNorm over channels and a GELU."""

    def __init__(self, kernel: int, c_in: int, c_out: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.conv = self.add_child("conv", PatchConv(kernel, c_in, c_out, rng))
        self.norm = self.add_child("norm", LayerNorm(c_out))

    def forward(self, x: np.ndarray):
        y, c_conv = self.conv.forward(x)
        n, c_norm = self.norm.forward(y)
        return gelu(n), (c_conv, c_norm, n)

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        c_conv, c_norm, n = cache
        dn = dout * gelu_grad(n)
        dy = self.norm.backward(dn, c_norm)
        return self.conv.backward(dy, c_conv)


def masked_mean_pool(frames: np.ndarray, mask: np.ndarray):
    """Mean over valid frames per batch row; frames (B, L, D), mask (B, L)."""
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("every clip needs at least one valid frame")
    pooled = (frames * mask[:, :, None]).sum(axis=1) / counts[:, None]
    return pooled, (mask, counts, frames.shape)


def masked_mean_pool_backward(dpooled: np.ndarray, cache) -> np.ndarray:
    mask, counts, shape = cache
    dframes = np.zeros(shape, dtype=np.float64)
    dframes += (dpooled / counts[:, None])[:, None, :] * mask[:, :, None]
    return dframes
