"""Layer-wise replay injection: blend generated historical entity vectors
into the current per-layer representations.

Rows outside the replay set are never touched. The blend weight alpha is
sigmoid of a learnable per-layer logit (stored with the reasoner parameters,
so it persists across tasks); the additive mode replaces the blend with
unweighted addition for the adaptive-balance ablation. Generated vectors are
constants during the backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .reasoner import sigmoid


@dataclass
class ReplayInjection:
    """Per-layer hook carrying the generated vectors and balance logits."""

    entity_ids: np.ndarray   # (m,) sorted entity ids eligible for injection
    vectors: np.ndarray      # (m, d) generated historical representations
    alpha_logit: np.ndarray  # (L,) shared with ReasonerParams.alpha_logit
    additive: bool = False   # unweighted addition instead of the blend

    def __post_init__(self):
        self.entity_ids = np.asarray(self.entity_ids, dtype=np.int64).reshape(-1)
        self.vectors = np.asarray(self.vectors, dtype=np.float64).reshape(
            len(self.entity_ids), -1
        )
        order = np.argsort(self.entity_ids)
        self.entity_ids = self.entity_ids[order]
        self.vectors = self.vectors[order]

    def alpha(self, layer: int) -> float:
        return sigmoid(self.alpha_logit[layer])

    def _check(self, h):
        if len(self.entity_ids) and (
            self.entity_ids.min() < 0 or self.entity_ids.max() >= h.shape[0]
        ):
            raise DomainError("replay entity id outside the vocabulary")
        if self.vectors.shape[1] != h.shape[1]:
            raise DomainError(
                f"replay vectors have dim {self.vectors.shape[1]}, expected {h.shape[1]}"
            )

    def apply(self, layer: int, h, alpha=None):
        """Hook protocol: returns (new matrix, cache for backward)."""
        self._check(h)
        out = h.copy()
        ids = self.entity_ids
        if len(ids) == 0:
            return out, None
        current_rows = h[ids]
        if self.additive:
            out[ids] = self.vectors + current_rows
            return out, {"rows": current_rows}
        a = self.alpha(layer) if alpha is None else float(alpha)
        out[ids] = a * self.vectors + (1.0 - a) * current_rows
        return out, {"rows": current_rows, "alpha": a}

    def backward(self, layer: int, d_out, cache, grads):
        """Gradient through apply; accumulates the balance-logit gradient."""
        if cache is None:
            return d_out
        ids = self.entity_ids
        d_in = d_out.copy()
        if self.additive:
            return d_in
        a = cache["alpha"]
        d_in[ids] = d_out[ids] * (1.0 - a)
        # d loss / d alpha, chained through alpha = sigmoid(logit)
        d_alpha = float(np.sum(d_out[ids] * (self.vectors - cache["rows"])))
        grads["alpha_logit"][layer] += d_alpha * a * (1.0 - a)
        return d_in


def inject_layer(h, layer: int, replay: ReplayInjection, alpha=None):
    """Blend replay rows into one layer's entity matrix.

    alpha pins the blend weight exactly (used by boundary tests and
    diagnostics); by default it comes from the layer's learned logit.
    """
    out, _ = replay.apply(layer, h, alpha=alpha)
    return out


def inject_final(h, replay: ReplayInjection, mode: str = "balanced", alpha=None, layer: int = 0):
    """One-shot injection at the final representation.

    direct-sum mode adds replay rows onto current rows; balanced mode applies
    the same blend as inject_layer (with `layer`'s alpha unless pinned).
    """
    replay._check(h)
    if mode == "direct-sum":
        out = h.copy()
        ids = replay.entity_ids
        if len(ids):
            out[ids] = replay.vectors + out[ids]
        return out
    if mode == "balanced":
        out, _ = replay.apply(layer, h, alpha=alpha)
        return out
    raise ValueError(f"unknown final-injection mode {mode!r}")


def blend_table(table, replay_map: dict, alpha: float):
    """Balanced blend applied to an embedding table, used when the diffusion
    model is updated continually: rows with a replay vector become
    alpha * replay + (1 - alpha) * current."""
    out = table.copy()
    for e in sorted(replay_map):
        if e < 0 or e >= table.shape[0]:
            raise DomainError(f"replay entity {e} outside the vocabulary")
        out[e] = alpha * replay_map[e] + (1.0 - alpha) * table[e]
    return out
