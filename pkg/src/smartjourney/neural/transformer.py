"""Conv + single encoder block + MLP-head regression network.

Scaled dot-product attention with four heads, a position-wise feed-forward
sublayer, post-norm residuals, and fixed sinusoidal positional encodings
added after the conv front-end (the encoder is permutation-equivariant
without them). Per-head query/key/value projections are stored as combined
d_model x d_model matrices; head i owns columns [i*d_k, (i+1)*d_k).
"""

from __future__ import annotations

import numpy as np

from .core import (
    Params,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    glorot_uniform,
    huber_grad,
    huber_loss,
    l2_grad,
    l2_penalty,
    layer_norm_backward,
    layer_norm_forward,
    relu,
    softmax,
)


def scaled_dot_product_attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """softmax(Q K^T / sqrt(d_k)) V with row-wise softmax.

    Accepts stacked leading dimensions; returns (output, attention weights).
    """
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query/key dimension mismatch: {q.shape} vs {k.shape}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = (q @ np.swapaxes(k, -1, -2)) * scale
    weights = softmax(scores, axis=-1)
    return weights @ v, weights


def sinusoidal_positions(length: int, d_model: int) -> np.ndarray:
    """Fixed sin/cos positional encoding table of shape (length, d_model)."""
    positions = np.arange(length)[:, np.newaxis].astype(np.float64)
    dims = np.arange(0, d_model, 2).astype(np.float64)
    angles = positions / np.power(10000.0, dims / d_model)
    pe = np.zeros((length, d_model))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dk)


def multi_head_attention(
    x: np.ndarray, params: Params, heads: int
) -> tuple[np.ndarray, dict]:
    """Self-attention over (B, T, d_model) input; projections carry no bias."""
    d_model = x.shape[-1]
    if params["attn.W_q"].shape[0] != d_model:
        raise ValueError(f"input dim {d_model} does not match attention weights")
    q = _split_heads(x @ params["attn.W_q"], heads)
    k = _split_heads(x @ params["attn.W_k"], heads)
    v = _split_heads(x @ params["attn.W_v"], heads)
    per_head, weights = scaled_dot_product_attention(q, k, v)
    concat = _merge_heads(per_head)
    out = concat @ params["attn.W_o"]
    cache = {"x": x, "q": q, "k": k, "v": v, "weights": weights, "concat": concat}
    return out, cache


def multi_head_attention_backward(
    dout: np.ndarray, cache: dict, params: Params, grads: Params
) -> np.ndarray:
    """Gradients of multi_head_attention; accumulates into `grads`, returns dx."""
    x, q, k, v = cache["x"], cache["q"], cache["k"], cache["v"]
    weights, concat = cache["weights"], cache["concat"]
    b, t, d_model = x.shape
    heads = q.shape[1]
    scale = 1.0 / np.sqrt(q.shape[-1])

    flat = concat.reshape(-1, d_model)
    grads["attn.W_o"] = flat.T @ dout.reshape(-1, d_model)
    dconcat = dout @ params["attn.W_o"].T
    dper_head = _split_heads(dconcat, heads)

    dweights = dper_head @ np.swapaxes(v, -1, -2)
    dv = np.swapaxes(weights, -1, -2) @ dper_head
    dscores = weights * (dweights - np.sum(dweights * weights, axis=-1, keepdims=True))
    dq = (dscores @ k) * scale
    dk = (np.swapaxes(dscores, -1, -2) @ q) * scale

    dx = np.zeros_like(x)
    x_flat = x.reshape(-1, d_model)
    for name, dh in (("attn.W_q", dq), ("attn.W_k", dk), ("attn.W_v", dv)):
        dmerged = _merge_heads(dh)
        grads[name] = x_flat.T @ dmerged.reshape(-1, d_model)
        dx += dmerged @ params[name].T
    return dx


def encoder_block_forward(x: np.ndarray, params: Params, heads: int) -> tuple[np.ndarray, dict]:
    """Post-norm encoder block: LN(x + MHA(x)), then LN(. + FFN(.))."""
    mha_out, mha_cache = multi_head_attention(x, params, heads)
    res1 = x + mha_out
    norm1, ln1_cache = layer_norm_forward(res1, params["ln1.g"], params["ln1.b"])
    ffn_raw = dense_forward(norm1, params["ffn1.W"], params["ffn1.b"])
    ffn_act = relu(ffn_raw)
    ffn_out = dense_forward(ffn_act, params["ffn2.W"], params["ffn2.b"])
    res2 = norm1 + ffn_out
    out, ln2_cache = layer_norm_forward(res2, params["ln2.g"], params["ln2.b"])
    cache = {
        "mha": mha_cache,
        "ln1": ln1_cache,
        "norm1": norm1,
        "ffn_raw": ffn_raw,
        "ffn_act": ffn_act,
        "ln2": ln2_cache,
    }
    return out, cache


def encoder_block_backward(
    dout: np.ndarray, cache: dict, params: Params, grads: Params
) -> np.ndarray:
    dres2, grads["ln2.g"], grads["ln2.b"] = layer_norm_backward(dout, cache["ln2"])
    dffn_act, grads["ffn2.W"], grads["ffn2.b"] = dense_backward(
        cache["ffn_act"], params["ffn2.W"], dres2
    )
    dffn_raw = dffn_act * (cache["ffn_raw"] > 0)
    dnorm1, grads["ffn1.W"], grads["ffn1.b"] = dense_backward(
        cache["norm1"], params["ffn1.W"], dffn_raw
    )
    dnorm1 = dnorm1 + dres2
    dres1, grads["ln1.g"], grads["ln1.b"] = layer_norm_backward(dnorm1, cache["ln1"])
    dx = multi_head_attention_backward(dres1, cache["mha"], params, grads)
    return dx + dres1


class TransformerNetwork:
    """Width-3 conv to d_model channels, one encoder block, mean pool, dense head."""

    model_type = "transformer"

    def __init__(
        self,
        input_features: int,
        window: int = 24,
        d_model: int = 256,
        heads: int = 4,
        ffn_hidden: int = 256,
        head_sizes: tuple[int, int, int] = (128, 64, 1),
        l2_lambda: float = 1e-4,
        use_positional_encoding: bool = True,
        seed: int = 0,
    ) -> None:
        if d_model % heads != 0:
            raise ValueError("d_model must be divisible by the head count")
        self.input_features = input_features
        self.window = window
        self.d_model = d_model
        self.heads = heads
        self.ffn_hidden = ffn_hidden
        self.head_sizes = head_sizes
        self.l2_lambda = l2_lambda
        self.use_positional_encoding = use_positional_encoding

        rng = np.random.default_rng(seed)
        p: Params = {
            "conv.K": glorot_uniform(
                rng, (3, input_features, d_model), fan_in=3 * input_features, fan_out=d_model
            ),
            "conv.b": np.zeros(d_model),
        }
        for name in ("attn.W_q", "attn.W_k", "attn.W_v", "attn.W_o"):
            p[name] = glorot_uniform(rng, (d_model, d_model), fan_in=d_model, fan_out=d_model)
        p["ln1.g"] = np.ones(d_model)
        p["ln1.b"] = np.zeros(d_model)
        p["ffn1.W"] = glorot_uniform(rng, (d_model, ffn_hidden), fan_in=d_model, fan_out=ffn_hidden)
        p["ffn1.b"] = np.zeros(ffn_hidden)
        p["ffn2.W"] = glorot_uniform(rng, (ffn_hidden, d_model), fan_in=ffn_hidden, fan_out=d_model)
        p["ffn2.b"] = np.zeros(d_model)
        p["ln2.g"] = np.ones(d_model)
        p["ln2.b"] = np.zeros(d_model)
        sizes = (d_model,) + head_sizes
        for idx in range(3):
            p[f"head{idx + 1}.W"] = glorot_uniform(
                rng, (sizes[idx], sizes[idx + 1]), fan_in=sizes[idx], fan_out=sizes[idx + 1]
            )
            p[f"head{idx + 1}.b"] = np.zeros(sizes[idx + 1])
        self.params = p

    @property
    def regularized_kernel(self) -> str:
        return "head1.W"

    def param_count(self) -> int:
        return sum(t.size for t in self.params.values())

    def forward(self, windows: np.ndarray) -> tuple[np.ndarray, dict]:
        """Batched forward; windows is (B, W, F), returns (B,) predictions."""
        if windows.ndim != 3 or windows.shape[2] != self.input_features:
            raise ValueError(f"expected (B, W, {self.input_features}) windows, got {windows.shape}")
        p = self.params
        conv_raw = conv1d_forward(windows, p["conv.K"], p["conv.b"])
        # token embeddings are scaled by sqrt(d_model) so the additive
        # positional encoding does not dominate the content
        tokens = relu(conv_raw) * np.sqrt(self.d_model)
        if self.use_positional_encoding:
            tokens = tokens + sinusoidal_positions(tokens.shape[1], self.d_model)
        encoded, block_cache = encoder_block_forward(tokens, p, self.heads)
        pooled = encoded.mean(axis=1)
        z1 = dense_forward(pooled, p["head1.W"], p["head1.b"])
        a1 = relu(z1)
        z2 = dense_forward(a1, p["head2.W"], p["head2.b"])
        a2 = relu(z2)
        out = dense_forward(a2, p["head3.W"], p["head3.b"])[:, 0]
        cache = {
            "windows": windows,
            "conv_raw": conv_raw,
            "block": block_cache,
            "seq_len": encoded.shape[1],
            "pooled": pooled,
            "z1": z1,
            "a1": a1,
            "z2": z2,
            "a2": a2,
        }
        return out, cache

    def predict(self, windows: np.ndarray) -> np.ndarray:
        return self.forward(windows)[0]

    def predict_one(self, window: np.ndarray) -> float:
        return float(self.predict(window[np.newaxis, :, :])[0])

    def backward(self, cache: dict, dpred: np.ndarray) -> Params:
        """Gradients of the data loss wrt every parameter, given d loss/d pred."""
        p = self.params
        grads: Params = {}
        dout = dpred[:, np.newaxis]

        da2, grads["head3.W"], grads["head3.b"] = dense_backward(cache["a2"], p["head3.W"], dout)
        dz2 = da2 * (cache["z2"] > 0)
        da1, grads["head2.W"], grads["head2.b"] = dense_backward(cache["a1"], p["head2.W"], dz2)
        dz1 = da1 * (cache["z1"] > 0)
        dpooled, grads["head1.W"], grads["head1.b"] = dense_backward(
            cache["pooled"], p["head1.W"], dz1
        )
        dencoded = np.repeat(dpooled[:, np.newaxis, :], cache["seq_len"], axis=1) / cache["seq_len"]
        dtokens = encoder_block_backward(dencoded, cache["block"], p, grads)
        dconv_raw = dtokens * (cache["conv_raw"] > 0) * np.sqrt(self.d_model)
        _, grads["conv.K"], grads["conv.b"] = conv1d_backward(
            cache["windows"], p["conv.K"], dconv_raw
        )
        return grads

    def loss_and_grads(
        self, windows: np.ndarray, targets: np.ndarray, delta: float = 1.0
    ) -> tuple[float, Params]:
        """Huber data loss plus the L2 kernel penalty, with full gradients."""
        preds, cache = self.forward(windows)
        loss = huber_loss(preds, targets, delta) + l2_penalty(
            self.params[self.regularized_kernel], self.l2_lambda
        )
        grads = self.backward(cache, huber_grad(preds, targets, delta))
        grads[self.regularized_kernel] = grads[self.regularized_kernel] + l2_grad(
            self.params[self.regularized_kernel], self.l2_lambda
        )
        return loss, grads
