"""Snapshot-sequence reasoner: stacked relation-aware aggregation layers with
a gated recurrence across snapshots and an inner-product decoder.

One evolution step per snapshot: L aggregation layers (each followed by the
optional per-layer replay hook), then a gate mixing the evolved state with the
previous step's entity state. All forward passes can record caches for the
manual backward pass used in training; gradients flow through the hook when
it is a ReplayInjection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, NumericError
from .kernels import aggregate_backward, aggregate_messages, in_degree


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def xavier(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass
class ReasonerParams:
    """All trainable state of one model copy; one frozen copy per finished task.

    The per-layer replay balance logits live here so they are trained,
    checkpointed, and inherited across tasks together with everything else.
    """

    ent: np.ndarray          # (V, d) entity embeddings
    rel: np.ndarray          # (2R, d) relation embeddings, inverses included
    w_self: np.ndarray       # (L, d, d) self-loop maps
    w_msg: np.ndarray        # (L, d, d) message maps
    w_gate: np.ndarray       # (d, d) recurrence gate
    b_gate: np.ndarray       # (d,)
    w_dec: np.ndarray        # (2d, d) decoder combiner on [subject; relation]
    b_dec: np.ndarray        # (d,)
    alpha_logit: np.ndarray  # (L,) replay balance, alpha = sigmoid(logit)

    @property
    def num_entities(self):
        return self.ent.shape[0]

    @property
    def dim(self):
        return self.ent.shape[1]

    @property
    def n_layers(self):
        return self.w_self.shape[0]

    def tensors(self) -> dict:
        return {
            "ent": self.ent,
            "rel": self.rel,
            "w_self": self.w_self,
            "w_msg": self.w_msg,
            "w_gate": self.w_gate,
            "b_gate": self.b_gate,
            "w_dec": self.w_dec,
            "b_dec": self.b_dec,
            "alpha_logit": self.alpha_logit,
        }

    def copy(self) -> "ReasonerParams":
        return ReasonerParams(**{k: v.copy() for k, v in self.tensors().items()})

    def assert_finite(self):
        for key, v in self.tensors().items():
            if not np.all(np.isfinite(v)):
                raise NumericError(f"non-finite values in {key}")

    def alphas(self) -> np.ndarray:
        return sigmoid(self.alpha_logit)


def init_reasoner(num_entities, num_relations, dim, n_layers, rng) -> ReasonerParams:
    """Variance-scaled init sized to the global vocabulary up front; entities
    unseen until later tasks simply keep their initial rows."""
    d = dim
    return ReasonerParams(
        ent=xavier(rng, num_entities, d),
        rel=xavier(rng, 2 * num_relations, d),
        w_self=np.stack([xavier(rng, d, d) for _ in range(n_layers)]),
        w_msg=np.stack([xavier(rng, d, d) for _ in range(n_layers)]),
        w_gate=xavier(rng, d, d),
        b_gate=np.zeros(d),
        w_dec=xavier(rng, 2 * d, d),
        b_dec=np.zeros(d),
        alpha_logit=np.zeros(n_layers),
    )


@dataclass
class RepresentationStack:
    """Per-layer entity matrices for the final snapshot plus the final state."""

    layers: list = field(default_factory=list)  # post-hook layer outputs
    h_final: np.ndarray | None = None


def rgcn_layer(h, facts, w_self, w_msg, rel_emb, activation=np.tanh):
    """h'_o = act( (1/c_o) * sum_{(s,r,o)} W_msg (h_s + h_r) + W_self h_o ),
    with c_o the in-degree of o (1 if isolated)."""
    if h.ndim != 2:
        raise ContractError(f"entity matrix must be 2-d, got shape {h.shape}")
    num_entities = h.shape[0]
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, facts.shape[-1] if facts.ndim > 1 else 4)
    src, rel, obj = facts[:, 0], facts[:, 1], facts[:, 2]
    deg = in_degree(obj, num_entities)
    agg = aggregate_messages(h, rel_emb, src, rel, obj, num_entities)
    pre = (agg / deg[:, None]) @ w_msg.T + h @ w_self.T
    return activation(pre)


def _apply_hook(hook, layer, y):
    if hook is None:
        return y, None
    if hasattr(hook, "apply"):
        out, cache = hook.apply(layer, y)
    else:
        out, cache = hook(layer, y), None
    if not isinstance(out, np.ndarray) or out.shape != y.shape:
        raise ContractError(
            f"replay hook at layer {layer} returned shape "
            f"{getattr(out, 'shape', None)}, expected {y.shape}"
        )
    return out, cache


def evolve(params: ReasonerParams, history, hook=None, want_cache=False):
    """Run the evolution units over `history` (chronological fact arrays).

    Returns a RepresentationStack; with want_cache=True also returns the
    cache consumed by evolve_backward. An identity hook leaves the output
    bit-identical to running without one.
    """
    num_entities, _d = params.ent.shape
    n_layers = params.n_layers
    h = params.ent.copy()
    stack = RepresentationStack()
    cache = []
    for facts in history:
        facts = np.asarray(facts, dtype=np.int64).reshape(-1, 4)
        src, rel, obj = facts[:, 0], facts[:, 1], facts[:, 2]
        deg = in_degree(obj, num_entities)
        h_in = h
        x = h_in
        layers = []
        stack.layers = []
        for l in range(n_layers):
            agg = aggregate_messages(x, params.rel, src, rel, obj, num_entities)
            msg = agg / deg[:, None]
            y = np.tanh(msg @ params.w_msg[l].T + x @ params.w_self[l].T)
            y_post, hook_cache = _apply_hook(hook, l, y)
            layers.append({"x": x, "msg": msg, "y": y, "hook_cache": hook_cache})
            stack.layers.append(y_post)
            x = y_post
        u = sigmoid(h_in @ params.w_gate.T + params.b_gate)
        h = u * x + (1.0 - u) * h_in
        cache.append({"edges": (src, rel, obj), "deg": deg, "h_in": h_in,
                      "layers": layers, "u": u, "x": x})
    stack.h_final = h
    if want_cache:
        return stack, cache
    return stack


def evolve_backward(params: ReasonerParams, cache, d_hfinal, grads, hook=None):
    """Accumulate gradients of a scalar loss through evolve's forward cache.

    `d_hfinal` is the loss gradient at the final entity state; replay hooks
    that are ReplayInjection instances contribute their balance-logit
    gradients through grads['alpha_logit'].
    """
    d_h = d_hfinal
    for snap in reversed(cache):
        u, x, h_in = snap["u"], snap["x"], snap["h_in"]
        d_x = d_h * u
        d_u = d_h * (x - h_in)
        d_hin = d_h * (1.0 - u)
        d_gate_pre = d_u * u * (1.0 - u)
        grads["w_gate"] += d_gate_pre.T @ h_in
        grads["b_gate"] += d_gate_pre.sum(axis=0)
        d_hin = d_hin + d_gate_pre @ params.w_gate
        src, rel, obj = snap["edges"]
        deg = snap["deg"]
        for l in reversed(range(params.n_layers)):
            lay = snap["layers"][l]
            if hook is not None and hasattr(hook, "backward"):
                d_y = hook.backward(l, d_x, lay["hook_cache"], grads)
            else:
                d_y = d_x
            d_pre = d_y * (1.0 - lay["y"] ** 2)
            grads["w_self"][l] += d_pre.T @ lay["x"]
            grads["w_msg"][l] += d_pre.T @ lay["msg"]
            d_x = d_pre @ params.w_self[l]
            d_agg = (d_pre @ params.w_msg[l]) / deg[:, None]
            aggregate_backward(d_agg, src, rel, obj, d_x, grads["rel"])
        d_h = d_hin + d_x
    grads["ent"] += d_h


def _check_queries(params, h_final, queries):
    queries = np.asarray(queries, dtype=np.int64).reshape(-1, 2)
    if len(queries):
        if queries.min() < 0 or queries[:, 0].max() >= h_final.shape[0]:
            raise DomainError("query subject id out of range")
        if queries[:, 1].max() >= params.rel.shape[0]:
            raise DomainError("query relation id out of range")
    return queries


def score(params: ReasonerParams, h_final, queries, want_cache=False):
    """Unnormalized logits over all entities for (subject, relation) queries.

    Row q is the inner product of a learned combination of the subject and
    relation vectors against every entity row of h_final.
    """
    queries = _check_queries(params, h_final, queries)
    q_in = np.concatenate([h_final[queries[:, 0]], params.rel[queries[:, 1]]], axis=1)
    q = q_in @ params.w_dec + params.b_dec
    logits = q @ h_final.T
    if want_cache:
        return logits, (queries, q_in, q)
    return logits


def score_backward(params: ReasonerParams, h_final, cache, d_logits, grads, d_hfinal):
    """Accumulate decoder gradients; adds the h_final gradient into d_hfinal."""
    queries, q_in, q = cache
    d = h_final.shape[1]
    d_q = d_logits @ h_final
    d_hfinal += d_logits.T @ q
    grads["w_dec"] += q_in.T @ d_q
    grads["b_dec"] += d_q.sum(axis=0)
    d_qin = d_q @ params.w_dec.T
    np.add.at(d_hfinal, queries[:, 0], d_qin[:, :d])
    np.add.at(grads["rel"], queries[:, 1], d_qin[:, d:])
