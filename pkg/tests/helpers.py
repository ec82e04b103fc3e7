"""Shared oracles for the unit and acceptance suites."""

import numpy as np

from polyaug.g2p import G2PModel, G2PParams
from polyaug.nn import masked_log_softmax
from polyaug.p2g import P2GModel, P2GParams


def softmax_oracle(scores, mask):
    """Plain softmax over the valid entries only, renormalized; zeros elsewhere."""
    out = np.zeros_like(scores, dtype=np.float64)
    for i in range(scores.shape[0]):
        idx = np.flatnonzero(mask[i])
        z = scores[i, idx] - scores[i, idx].max()
        e = np.exp(z)
        out[i, idx] = e / e.sum()
    return out


def random_mask_gold(rng, n, classes):
    mask = rng.random((n, classes)) < 0.5
    gold = rng.integers(0, classes, n)
    mask[np.arange(n), gold] = True
    return mask, gold


def toy_g2p(rng, n_chars=4, n_pos=2, classes=5, radius=1, hidden=4):
    hp = G2PParams(radius=radius, d_char=2, d_pos=1, d_bmes=1, hidden=hidden, lr=0.1, epochs=1, batch_size=8)
    w = 2 * radius + 1
    in_dim = w * 4
    params = {
        "char_emb": rng.normal(size=(n_chars + 2, 2)),
        "pos_emb": rng.normal(size=(n_pos + 1, 1)),
        "bmes_emb": rng.normal(size=(5, 1)),
        "W1": rng.normal(size=(in_dim, hidden)) / np.sqrt(in_dim),
        "b1": rng.normal(size=hidden) * 0.1,
        "W2": rng.normal(size=(hidden, classes)),
        "b2": rng.normal(size=classes) * 0.1,
    }
    model = G2PModel(hp, params, "toy", n_chars, n_pos)
    return model, hp


def toy_g2p_inputs(rng, model, n):
    w = 2 * model.hp.radius + 1
    return (rng.integers(0, model.n_chars + 2, (n, w)), rng.integers(0, model.n_pos + 1, (n, w)),
            rng.integers(0, 5, (n, w)))


def toy_p2g(rng, n_pinyin=4, classes=6, radius=1, hidden=4):
    hp = P2GParams(radius=radius, hidden=hidden, lr=0.1, epochs=1, batch_size=8)
    w = 2 * radius + 1
    params = {
        "W_in": rng.normal(size=(w, n_pinyin + 2, hidden)) / np.sqrt(w),
        "b1": rng.normal(size=hidden) * 0.1,
        "W2": rng.normal(size=(hidden, classes)),
        "b2": rng.normal(size=classes) * 0.1,
    }
    return P2GModel(hp, params, "toy", n_pinyin), hp


def toy_p2g_inputs(rng, model, n):
    w = 2 * model.hp.radius + 1
    return (rng.integers(0, model.n_pinyin + 2, (n, w)),)


def n_params(model):
    return sum(v.size for v in model.params.values())


def gradient_check(model, inputs, mask, gold, h=1e-4):
    """Largest per-element |analytic - fd| / (|analytic| + 1e-8) over all parameters.

    Runs in extended precision with a fourth-order central stencil, so the
    finite-difference error is far below the tolerance being tested.
    """
    model.params = {k: v.astype(np.longdouble) for k, v in model.params.items()}
    _, grads = model.loss_and_grads(inputs, mask, gold)
    h = np.longdouble(h)
    worst = 0.0
    for name, p in model.params.items():
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for j in range(flat.size):
            x0 = flat[j]
            f = []
            for step in (h, -h, 2 * h, -2 * h):
                flat[j] = x0 + step
                f.append(model.loss(inputs, mask, gold))
            flat[j] = x0
            fd = (8 * (f[0] - f[1]) - (f[2] - f[3])) / (12 * h)
            err = float(abs(g[j] - fd) / (abs(g[j]) + 1e-8))
            worst = max(worst, err)
    return worst


def min_abs_preactivation(model, inputs):
    pre, _ = model._hidden_pre(inputs)
    return float(np.abs(pre).min())


def gradcheck_draw(kind, rng, batch=6, kink=1e-2):
    """A random (model, inputs, mask, gold) whose hidden units sit away from the ReLU kink."""
    while True:
        if kind == "g2p":
            model, _ = toy_g2p(rng)
            inputs = toy_g2p_inputs(rng, model, batch)
            classes = model.params["W2"].shape[1]
        else:
            model, _ = toy_p2g(rng)
            inputs = toy_p2g_inputs(rng, model, batch)
            classes = model.params["W2"].shape[1]
        if min_abs_preactivation(model, inputs) > kink:
            mask, gold = random_mask_gold(rng, batch, classes)
            return model, inputs, mask, gold


def initial_loss_oracle(mask):
    return float(np.mean(np.log(mask.sum(axis=1))))


__all__ = ["softmax_oracle", "random_mask_gold", "toy_g2p", "toy_p2g", "gradient_check", "gradcheck_draw",
           "n_params", "initial_loss_oracle", "masked_log_softmax"]
