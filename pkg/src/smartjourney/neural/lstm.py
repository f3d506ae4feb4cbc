"""Conv + two-layer LSTM + MLP-head regression network.

The recurrent cell follows the classic gate formulation: forget, input and
output gates are sigmoids of affine maps on the concatenation
[h_prev, x_t]; the candidate cell value uses tanh; the new cell state is
f * C_prev + i * C_tilde and the hidden state is o * tanh(C_t). Backward
passes are hand-derived (backpropagation through time).
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
    relu,
    sigmoid,
)

GATES = ("f", "i", "c", "o")


def init_lstm_cell(
    rng: np.random.Generator, hidden: int, inputs: int, prefix: str
) -> Params:
    """Gate weights (hidden, hidden+inputs) and biases; forget bias starts at 1."""
    params: Params = {}
    for gate in GATES:
        params[f"{prefix}.W_{gate}"] = glorot_uniform(
            rng, (hidden, hidden + inputs), fan_in=hidden + inputs, fan_out=hidden
        )
        bias = np.zeros(hidden)
        if gate == "f":
            bias += 1.0
        params[f"{prefix}.b_{gate}"] = bias
    return params


def lstm_cell_step(
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    params: Params,
    prefix: str,
) -> tuple[np.ndarray, np.ndarray, tuple]:
    """One batched cell step; x is (B, I), h_prev and c_prev are (B, H)."""
    z = np.concatenate([h_prev, x], axis=-1)
    f = sigmoid(z @ params[f"{prefix}.W_f"].T + params[f"{prefix}.b_f"])
    i = sigmoid(z @ params[f"{prefix}.W_i"].T + params[f"{prefix}.b_i"])
    c_tilde = np.tanh(z @ params[f"{prefix}.W_c"].T + params[f"{prefix}.b_c"])
    o = sigmoid(z @ params[f"{prefix}.W_o"].T + params[f"{prefix}.b_o"])
    c = f * c_prev + i * c_tilde
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return h, c, (z, f, i, o, c_tilde, c_prev, tanh_c)


def lstm_sequence_forward(
    inputs: np.ndarray, params: Params, prefix: str, hidden: int
) -> tuple[np.ndarray, list[tuple]]:
    """Run the cell over a (B, T, I) sequence from zero initial state."""
    b, t, _ = inputs.shape
    h = np.zeros((b, hidden))
    c = np.zeros((b, hidden))
    outputs = np.empty((b, t, hidden))
    caches = []
    for step in range(t):
        h, c, cache = lstm_cell_step(inputs[:, step, :], h, c, params, prefix)
        outputs[:, step, :] = h
        caches.append(cache)
    return outputs, caches


def lstm_sequence_backward(
    dh_seq: np.ndarray, caches: list[tuple], params: Params, prefix: str, grads: Params
) -> np.ndarray:
    """Backprop through time given upstream gradients on every hidden output.

    Accumulates parameter gradients into `grads` and returns gradients with
    respect to the input sequence.
    """
    b, t, hidden = dh_seq.shape
    n_in = params[f"{prefix}.W_f"].shape[1] - hidden
    dx_seq = np.empty((b, t, n_in))
    dh_next = np.zeros((b, hidden))
    dc_next = np.zeros((b, hidden))
    w = {g: params[f"{prefix}.W_{g}"] for g in GATES}
    dw = {g: np.zeros_like(w[g]) for g in GATES}
    db = {g: np.zeros(hidden) for g in GATES}

    for step in range(t - 1, -1, -1):
        z, f, i, o, c_tilde, c_prev, tanh_c = caches[step]
        dh = dh_seq[:, step, :] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
        da = {
            "f": dc * c_prev * f * (1.0 - f),
            "i": dc * c_tilde * i * (1.0 - i),
            "c": dc * i * (1.0 - c_tilde * c_tilde),
            "o": dh * tanh_c * o * (1.0 - o),
        }
        dz = np.zeros_like(z)
        for g in GATES:
            dw[g] += da[g].T @ z
            db[g] += da[g].sum(axis=0)
            dz += da[g] @ w[g]
        dh_next = dz[:, :hidden]
        dx_seq[:, step, :] = dz[:, hidden:]
        dc_next = dc * f

    for g in GATES:
        grads[f"{prefix}.W_{g}"] = dw[g]
        grads[f"{prefix}.b_{g}"] = db[g]
    return dx_seq


class LstmNetwork:
    """Width-3 conv front-end, two stacked LSTM layers, three-dense head.

    The head consumes the final hidden state of the second LSTM; its first
    dense layer carries the L2 kernel penalty.
    """

    model_type = "lstm"

    def __init__(
        self,
        input_features: int,
        window: int = 24,
        conv_filters: int = 32,
        hidden1: int = 128,
        hidden2: int = 64,
        head_sizes: tuple[int, int, int] = (128, 64, 1),
        l2_lambda: float = 1e-4,
        seed: int = 0,
    ) -> None:
        self.input_features = input_features
        self.window = window
        self.conv_filters = conv_filters
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.head_sizes = head_sizes
        self.l2_lambda = l2_lambda

        rng = np.random.default_rng(seed)
        p: Params = {
            "conv.K": glorot_uniform(
                rng, (3, input_features, conv_filters),
                fan_in=3 * input_features, fan_out=conv_filters,
            ),
            "conv.b": np.zeros(conv_filters),
        }
        p.update(init_lstm_cell(rng, hidden1, conv_filters, "lstm1"))
        p.update(init_lstm_cell(rng, hidden2, hidden1, "lstm2"))
        sizes = (hidden2,) + head_sizes
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
        conv_act = relu(conv_raw)
        h1_seq, caches1 = lstm_sequence_forward(conv_act, p, "lstm1", self.hidden1)
        h2_seq, caches2 = lstm_sequence_forward(h1_seq, p, "lstm2", self.hidden2)
        last = h2_seq[:, -1, :]
        z1 = dense_forward(last, p["head1.W"], p["head1.b"])
        a1 = relu(z1)
        z2 = dense_forward(a1, p["head2.W"], p["head2.b"])
        a2 = relu(z2)
        out = dense_forward(a2, p["head3.W"], p["head3.b"])[:, 0]
        cache = {
            "windows": windows,
            "conv_raw": conv_raw,
            "conv_act": conv_act,
            "caches1": caches1,
            "caches2": caches2,
            "h2_shape": h2_seq.shape,
            "last": last,
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
        dlast, grads["head1.W"], grads["head1.b"] = dense_backward(cache["last"], p["head1.W"], dz1)

        dh2_seq = np.zeros(cache["h2_shape"])
        dh2_seq[:, -1, :] = dlast
        dh1_seq = lstm_sequence_backward(dh2_seq, cache["caches2"], p, "lstm2", grads)
        dconv_act = lstm_sequence_backward(dh1_seq, cache["caches1"], p, "lstm1", grads)
        dconv_raw = dconv_act * (cache["conv_raw"] > 0)
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
