"""Conditional denoising diffusion over entity-embedding space.

A fact's subject and relation embeddings are condition tokens; the object
embedding is corrupted by the forward process and reconstructed by a small
transformer encoder that predicts the clean vector directly. Reverse sampling
optionally adds, after each denoising step, the gradient of the frozen
reasoner's softmax probability of the fact's true tail, steering generation
toward representations the current model still scores highly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, NumericError
from .optim import Adam
from .replay import blend_table
from .reasoner import xavier

LN_EPS = 1e-5
TARGET_SLOT = 2  # (subject, relation, noised-object)


# --- schedule ---------------------------------------------------------------

@dataclass
class NoiseSchedule:
    """Beta sequence for steps 1..N with cumulative-product alphas.

    alpha_bar is indexed 0..N with alpha_bar[0] = 1. The linear factory
    produces the production schedule (strictly increasing betas in (0, 1));
    the constructor also admits degenerate test schedules (zeros allowed).
    """

    betas: np.ndarray
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64).reshape(-1)
        if len(self.betas) == 0:
            raise DomainError("schedule needs at least one step")
        if self.betas.min() < 0 or self.betas.max() >= 1:
            raise DomainError("betas must lie in [0, 1)")
        if np.any(np.diff(self.betas) < 0):
            raise DomainError("betas must be non-decreasing")
        self.alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - self.betas)])

    @classmethod
    def linear(cls, n_steps: int = 100, beta_min: float = 1e-4, beta_max: float = 0.02):
        return cls(np.linspace(beta_min, beta_max, n_steps))

    @property
    def n_steps(self) -> int:
        return len(self.betas)

    def _check_n(self, n: int):
        if not 1 <= n <= self.n_steps:
            raise DomainError(f"step {n} outside 1..{self.n_steps}")

    def marginal(self, n):
        """(sqrt(abar_n), sqrt(1 - abar_n)) for closed-form forward noising."""
        ab = self.alpha_bar[np.asarray(n)]
        return np.sqrt(ab), np.sqrt(1.0 - ab)

    def posterior(self, n: int):
        """Coefficients (on x0hat, on x_n) and variance of q(x_{n-1}|x_n, x0)."""
        self._check_n(n)
        beta = self.betas[n - 1]
        ab_prev = self.alpha_bar[n - 1]
        ab = self.alpha_bar[n]
        denom = 1.0 - ab
        if denom <= 0:  # degenerate noiseless chain
            return 0.0, 1.0, 0.0
        coef_x0 = np.sqrt(ab_prev) * beta / denom
        coef_xn = np.sqrt(1.0 - beta) * (1.0 - ab_prev) / denom
        var = beta * (1.0 - ab_prev) / denom
        return coef_x0, coef_xn, var


def forward_noise(x0, n, schedule: NoiseSchedule, rng=None, noise=None):
    """Draw from the closed-form marginal q(x_n | x_0).

    Equivalent in distribution to iterating the single-step corruption n
    times. `noise` pins the Gaussian draw (tests); otherwise rng supplies it.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if np.isscalar(n):
        schedule._check_n(int(n))
    else:
        n = np.asarray(n)
        if n.min() < 1 or n.max() > schedule.n_steps:
            raise DomainError(f"step index outside 1..{schedule.n_steps}")
    if noise is None:
        noise = rng.standard_normal(x0.shape)
    sq_ab, sq_1mab = schedule.marginal(n)
    if x0.ndim == 2 and not np.isscalar(n):
        sq_ab = sq_ab[:, None]
        sq_1mab = sq_1mab[:, None]
    return sq_ab * x0 + sq_1mab * noise


# --- denoiser ---------------------------------------------------------------

@dataclass
class DenoiserParams:
    """Transformer-encoder denoiser weights plus schedule-sized step table."""

    dim: int
    n_steps: int
    n_layers: int
    n_heads: int
    d_ff: int
    tensors: dict

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(
            self.dim, self.n_steps, self.n_layers, self.n_heads, self.d_ff,
            {k: v.copy() for k, v in self.tensors.items()},
        )

    def assert_finite(self):
        for key, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                raise NumericError(f"non-finite values in denoiser tensor {key}")


def init_denoiser(dim, n_steps, rng, n_layers=2, n_heads=4, d_ff=None) -> DenoiserParams:
    if dim % n_heads != 0:
        raise DomainError(f"dim {dim} not divisible by n_heads {n_heads}")
    d_ff = d_ff or 2 * dim
    t = {
        "w_in": xavier(rng, dim, dim),
        "b_in": np.zeros(dim),
        "pos": xavier(rng, 3, dim),
        "t_emb": xavier(rng, n_steps + 1, dim),
        "lnf_g": np.ones(dim),
        "lnf_b": np.zeros(dim),
        "w_out": xavier(rng, dim, dim),
        "b_out": np.zeros(dim),
    }
    for i in range(n_layers):
        p = f"l{i}_"
        t[p + "ln1_g"] = np.ones(dim)
        t[p + "ln1_b"] = np.zeros(dim)
        for name in ("wq", "wk", "wv", "wo"):
            t[p + name] = xavier(rng, dim, dim)
        for name in ("bq", "bk", "bv", "bo"):
            t[p + name] = np.zeros(dim)
        t[p + "ln2_g"] = np.ones(dim)
        t[p + "ln2_b"] = np.zeros(dim)
        t[p + "wf1"] = xavier(rng, d_ff, dim)
        t[p + "bf1"] = np.zeros(d_ff)
        t[p + "wf2"] = xavier(rng, dim, d_ff)
        t[p + "bf2"] = np.zeros(dim)
    return DenoiserParams(dim, n_steps, n_layers, n_heads, d_ff, t)


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_backward(d_y, cache, g, d_g, d_b):
    xhat, inv = cache
    d_g += (d_y * xhat).reshape(-1, d_y.shape[-1]).sum(axis=0)
    d_b += d_y.reshape(-1, d_y.shape[-1]).sum(axis=0)
    d_xhat = d_y * g
    m1 = d_xhat.mean(axis=-1, keepdims=True)
    m2 = (d_xhat * xhat).mean(axis=-1, keepdims=True)
    return (d_xhat - m1 - xhat * m2) * inv


def denoiser_forward(dm: DenoiserParams, tokens, n, want_cache=False):
    """Predict the clean target vector from (condition, condition, noised) tokens.

    `n` may be a scalar step or a per-sample array. Returns (x0hat, final
    hidden states); with want_cache=True the second element is the backward
    cache instead.
    """
    t = dm.tensors
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim == 2:
        tokens = tokens[None]
    B = tokens.shape[0]
    n_arr = np.full(B, n, dtype=np.int64) if np.isscalar(n) else np.asarray(n, dtype=np.int64)
    x = tokens @ t["w_in"].T + t["b_in"] + t["pos"][None] + t["t_emb"][n_arr][:, None, :]
    cache = {"tokens": tokens, "n": n_arr, "layers": []}
    H, dh = dm.n_heads, dm.dim // dm.n_heads
    scale = 1.0 / np.sqrt(dh)
    for i in range(dm.n_layers):
        p = f"l{i}_"
        a, ln1c = _layer_norm(x, t[p + "ln1_g"], t[p + "ln1_b"])
        q = a @ t[p + "wq"].T + t[p + "bq"]
        k = a @ t[p + "wk"].T + t[p + "bk"]
        v = a @ t[p + "wv"].T + t[p + "bv"]
        qh = q.reshape(B, 3, H, dh).transpose(0, 2, 1, 3)
        kh = k.reshape(B, 3, H, dh).transpose(0, 2, 1, 3)
        vh = v.reshape(B, 3, H, dh).transpose(0, 2, 1, 3)
        logits = qh @ kh.transpose(0, 1, 3, 2) * scale
        logits -= logits.max(axis=-1, keepdims=True)
        att = np.exp(logits)
        att /= att.sum(axis=-1, keepdims=True)
        ctx = (att @ vh).transpose(0, 2, 1, 3).reshape(B, 3, dm.dim)
        x_attn = x + ctx @ t[p + "wo"].T + t[p + "bo"]
        f, ln2c = _layer_norm(x_attn, t[p + "ln2_g"], t[p + "ln2_b"])
        h1 = f @ t[p + "wf1"].T + t[p + "bf1"]
        hr = np.maximum(h1, 0.0)
        x_out = x_attn + hr @ t[p + "wf2"].T + t[p + "bf2"]
        cache["layers"].append(
            {"a": a, "ln1c": ln1c, "qh": qh, "kh": kh, "vh": vh, "att": att,
             "ctx": ctx, "f": f, "ln2c": ln2c, "h1": h1, "hr": hr}
        )
        x = x_out
    xf, lnfc = _layer_norm(x, t["lnf_g"], t["lnf_b"])
    cache["lnfc"] = lnfc
    cache["xf"] = xf
    x0hat = xf[:, TARGET_SLOT] @ t["w_out"].T + t["b_out"]
    if want_cache:
        return x0hat, cache
    return x0hat, xf


def project_slot(dm: DenoiserParams, hidden, slot: int):
    """Re-project one token's final hidden state through the output head."""
    t = dm.tensors
    return hidden[:, slot] @ t["w_out"].T + t["b_out"]


def denoiser_backward(dm: DenoiserParams, cache, d_x0hat):
    """Parameter gradients of a scalar loss; input-token gradients are not
    needed anywhere (embeddings are frozen inputs here) and are skipped."""
    t = dm.tensors
    grads = {k: np.zeros_like(v) for k, v in t.items()}
    B = cache["tokens"].shape[0]
    H, dh = dm.n_heads, dm.dim // dm.n_heads
    scale = 1.0 / np.sqrt(dh)
    xf = cache["xf"]
    grads["w_out"] += d_x0hat.T @ xf[:, TARGET_SLOT]
    grads["b_out"] += d_x0hat.sum(axis=0)
    d_xf = np.zeros_like(xf)
    d_xf[:, TARGET_SLOT] = d_x0hat @ t["w_out"]
    d_x = _layer_norm_backward(d_xf, cache["lnfc"], t["lnf_g"], grads["lnf_g"], grads["lnf_b"])
    for i in reversed(range(dm.n_layers)):
        p = f"l{i}_"
        lay = cache["layers"][i]
        # ffn block
        d_ffn = d_x
        d2 = d_ffn.reshape(-1, dm.dim)
        grads[p + "wf2"] += d2.T @ lay["hr"].reshape(-1, dm.d_ff)
        grads[p + "bf2"] += d2.sum(axis=0)
        d_hr = d_ffn @ t[p + "wf2"]
        d_h1 = d_hr * (lay["h1"] > 0)
        d1 = d_h1.reshape(-1, dm.d_ff)
        grads[p + "wf1"] += d1.T @ lay["f"].reshape(-1, dm.dim)
        grads[p + "bf1"] += d1.sum(axis=0)
        d_f = d_h1 @ t[p + "wf1"]
        d_x = d_x + _layer_norm_backward(
            d_f, lay["ln2c"], t[p + "ln2_g"], grads[p + "ln2_g"], grads[p + "ln2_b"]
        )
        # attention block
        d_attn = d_x
        da2 = d_attn.reshape(-1, dm.dim)
        grads[p + "wo"] += da2.T @ lay["ctx"].reshape(-1, dm.dim)
        grads[p + "bo"] += da2.sum(axis=0)
        d_ctx = (d_attn @ t[p + "wo"]).reshape(B, 3, H, dh).transpose(0, 2, 1, 3)
        att, vh, qh, kh = lay["att"], lay["vh"], lay["qh"], lay["kh"]
        d_att = d_ctx @ vh.transpose(0, 1, 3, 2)
        d_vh = att.transpose(0, 1, 3, 2) @ d_ctx
        d_logits = att * (d_att - (d_att * att).sum(axis=-1, keepdims=True))
        d_qh = d_logits @ kh * scale
        d_kh = d_logits.transpose(0, 1, 3, 2) @ qh * scale
        d_q = d_qh.transpose(0, 2, 1, 3).reshape(B, 3, dm.dim)
        d_k = d_kh.transpose(0, 2, 1, 3).reshape(B, 3, dm.dim)
        d_v = d_vh.transpose(0, 2, 1, 3).reshape(B, 3, dm.dim)
        a2 = lay["a"].reshape(-1, dm.dim)
        d_a = np.zeros_like(lay["a"])
        for name, dmat in (("wq", d_q), ("wk", d_k), ("wv", d_v)):
            dm2 = dmat.reshape(-1, dm.dim)
            grads[p + name] += dm2.T @ a2
            grads[p + "b" + name[1]] += dm2.sum(axis=0)
            d_a += dmat @ t[p + name]
        d_x = d_x + _layer_norm_backward(
            d_a, lay["ln1c"], t[p + "ln1_g"], grads[p + "ln1_g"], grads[p + "ln1_b"]
        )
    # input projection, position and step embeddings
    np.add.at(grads["t_emb"], cache["n"], d_x.sum(axis=1))
    grads["pos"] += d_x.sum(axis=0)
    dx2 = d_x.reshape(-1, dm.dim)
    grads["w_in"] += dx2.T @ cache["tokens"].reshape(-1, dm.dim)
    grads["b_in"] += dx2.sum(axis=0)
    return grads


# --- conditioned latents and reverse steps ----------------------------------

@dataclass
class ConditionedLatent:
    """Token triple (condition, condition, latent) during reverse sampling."""

    tokens: np.ndarray  # (B, 3, d)
    target_slot: int = TARGET_SLOT

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim == 2:
            self.tokens = self.tokens[None]
        if self.tokens.shape[1] != 3:
            raise ContractError(f"latent expects 3 tokens, got {self.tokens.shape}")

    @property
    def target(self):
        return self.tokens[:, self.target_slot]


def denoise_step(latent: ConditionedLatent, n: int, dm: DenoiserParams,
                 schedule: NoiseSchedule, rng=None, noise=None) -> ConditionedLatent:
    """One reverse step: predict x0, sample the fixed-variance posterior.

    Condition tokens pass through untouched; at n=1 the posterior mean is
    returned without added noise.
    """
    schedule._check_n(n)
    if latent.tokens.shape[-1] != dm.dim:
        raise ContractError(f"latent dim {latent.tokens.shape[-1]} != denoiser dim {dm.dim}")
    x0hat, _ = denoiser_forward(dm, latent.tokens, n)
    coef_x0, coef_xn, var = schedule.posterior(n)
    mean = coef_x0 * x0hat + coef_xn * latent.target
    if n > 1:
        if noise is None:
            noise = rng.standard_normal(mean.shape)
        x_prev = mean + np.sqrt(var) * noise
    else:
        x_prev = mean
    tokens = latent.tokens.copy()
    tokens[:, latent.target_slot] = x_prev
    return ConditionedLatent(tokens=tokens, target_slot=latent.target_slot)


# --- guidance ---------------------------------------------------------------

class GuidanceScorer:
    """Closed-form gradient of the frozen reasoner's softmax tail probability
    with a candidate vector substituted for the query entity's row.

    Gradients flow only into the substituted vector, never into the reasoner.
    """

    def __init__(self, params, tau: float = 0.5):
        self.ent = params.ent
        self.rel = params.rel
        self.w_dec = params.w_dec
        self.b_dec = params.b_dec
        self.tau = float(tau)

    def _logits(self, x, s, r, target):
        d = self.ent.shape[1]
        hs = self.ent[s].copy()
        mask = s == target
        hs[mask] = x[mask]
        q = np.concatenate([hs, self.rel[r]], axis=1) @ self.w_dec + self.b_dec
        logits = q @ self.ent.T
        rows = np.arange(len(s))
        logits[rows, target] = np.einsum("bd,bd->b", q, x)
        return logits, q, mask

    def prob(self, x, s, r, target):
        """Softmax probability (temperature tau) of the true tail."""
        logits, _, _ = self._logits(x, s, r, target)
        z = logits / self.tau
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        return p[np.arange(len(s)), target]

    def prob_and_grad(self, x, s, r, target):
        logits, q, mask = self._logits(x, s, r, target)
        z = logits / self.tau
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        rows = np.arange(len(s))
        pt = p[rows, target]
        grad = (pt * (1.0 - pt) / self.tau)[:, None] * q
        if np.any(mask):
            d = self.ent.shape[1]
            # query side when the query entity is its own neighbor
            s_sub = p @ self.ent + pt[:, None] * (x - self.ent[target])
            g_q = (pt / self.tau)[:, None] * ((x - s_sub) @ self.w_dec[:d].T)
            grad = grad + mask[:, None] * g_q
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite guidance gradient")
        return pt, grad


def reverse_sample(facts, dm: DenoiserParams, schedule: NoiseSchedule, source, rng):
    """Plain (unguided) reverse sampling for prompt facts (s, r, e); the
    independent twin of guided_reverse at gamma = 0."""
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    s, r = facts[:, 0], facts[:, 1]
    tokens = np.stack(
        [source.ent[s], source.rel[r], rng.standard_normal((len(facts), dm.dim))], axis=1
    )
    latent = ConditionedLatent(tokens=tokens)
    for n in range(schedule.n_steps, 0, -1):
        latent = denoise_step(latent, n, dm, schedule, rng)
    return latent.target


def guided_reverse(facts, dm: DenoiserParams, schedule: NoiseSchedule, source,
                   gamma: float, rng, tau: float = 0.5):
    """Generate historical representations for prompt facts (s, r, e_q).

    Denoise first, then push each intermediate along the gradient of the
    frozen scorer's softmax probability of e_q. Returns the generated target
    vectors and the neighbors' re-projected final hidden states. All prompts
    are processed as one batched denoiser call per step.
    """
    if gamma < 0:
        raise DomainError(f"guidance scale must be >= 0, got {gamma}")
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, 3)
    s, r, e_q = facts[:, 0], facts[:, 1], facts[:, 2]
    scorer = GuidanceScorer(source, tau=tau) if gamma > 0 else None
    cond_s = source.ent[s]
    cond_r = source.rel[r]
    x = rng.standard_normal((len(facts), dm.dim))
    hidden = None
    for n in range(schedule.n_steps, 0, -1):
        tokens = np.stack([cond_s, cond_r, x], axis=1)
        x0hat, hs = denoiser_forward(dm, tokens, n)
        coef_x0, coef_xn, var = schedule.posterior(n)
        mean = coef_x0 * x0hat + coef_xn * x
        if n > 1:
            x = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
        else:
            x = mean
            hidden = hs
        if scorer is not None:
            _, grad = scorer.prob_and_grad(x, s, r, e_q)
            x = x + gamma * grad
    return x, project_slot(dm, hidden, 0)


def aggregate_replay(outputs: dict) -> dict:
    """Flat mean of every generated occurrence of each entity across all
    sampled time slices."""
    pooled = {}
    for e in sorted(outputs):
        vecs = outputs[e]
        if len(vecs) == 0:
            raise ContractError(f"entity {e} has no generated vectors")
        pooled[e] = np.mean(np.asarray(vecs, dtype=np.float64), axis=0)
    return pooled


# --- training ---------------------------------------------------------------

def _softmax_ce(logits, targets):
    B = len(targets)
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(B)
    loss = float((lse - z[rows, targets]).mean())
    d = np.exp(z - lse[:, None])
    d[rows, targets] -= 1.0
    return loss, d / B


def _train_denoiser(dm, quads, ent_emb, rel_emb, schedule, epochs, rng, lr, batch_size):
    opt = Adam(dm.tensors, lr=lr)
    losses = []
    n_facts = len(quads)
    for _ in range(epochs):
        perm = rng.permutation(n_facts)
        epoch_loss = 0.0
        for lo in range(0, n_facts, batch_size):
            batch = quads[perm[lo : lo + batch_size]]
            s, r, o = batch[:, 0], batch[:, 1], batch[:, 2]
            B = len(batch)
            steps = rng.integers(1, schedule.n_steps + 1, size=B)
            x0 = ent_emb[o]
            xn = forward_noise(x0, steps, schedule, rng)
            tokens = np.stack([ent_emb[s], rel_emb[r], xn], axis=1)
            x0hat, cache = denoiser_forward(dm, tokens, steps, want_cache=True)
            diff = x0hat - x0
            mse = float((diff * diff).sum(axis=1).mean())
            dec_logits = x0hat @ ent_emb.T
            ce, d_logits = _softmax_ce(dec_logits, o)
            d_x0hat = 2.0 * diff / B + d_logits @ ent_emb
            opt.step(denoiser_backward(dm, cache, d_x0hat))
            epoch_loss += (mse + ce) * B
        losses.append(epoch_loss / n_facts)
    return losses


def pretrain(dm: DenoiserParams, facts, ent_emb, rel_emb, schedule: NoiseSchedule,
             epochs: int, rng, lr: float = 1e-3, batch_size: int = 128):
    """Train the denoiser on training facts only (provenance enforced).

    Mutates dm in place; returns per-epoch mean losses (reconstruction plus
    the entity-id decoder term).
    """
    quads = _train_quads(facts)
    if len(quads) == 0:
        warnings.warn("pretrain called with no facts; parameters unchanged", stacklevel=2)
        return []
    return _train_denoiser(dm, quads, ent_emb, rel_emb, schedule, epochs, rng, lr, batch_size)


def continual_update_dm(dm: DenoiserParams, facts, ent_emb, rel_emb,
                        schedule: NoiseSchedule, epochs: int, rng,
                        lr: float = 1e-3, batch_size: int = 128,
                        replay_map: dict | None = None, alpha: float = 0.5):
    """Update a copy of the previous task's denoiser on the new task's facts.

    When a replay map is available, the entity rows it covers are balanced
    with their generated historical vectors before being consumed, preserving
    historical knowledge inside the denoiser's targets and conditions.
    """
    dm_next = dm.copy()
    quads = _train_quads(facts)
    if len(quads) == 0 or epochs == 0:
        return dm_next, []
    ent_used = blend_table(ent_emb, replay_map, alpha) if replay_map else ent_emb
    losses = _train_denoiser(dm_next, quads, ent_used, rel_emb, schedule, epochs, rng, lr, batch_size)
    return dm_next, losses


def reconstruction_loss(dm: DenoiserParams, facts, ent_emb, rel_emb,
                        schedule: NoiseSchedule, seed: int = 0):
    """Mean squared reconstruction error over facts at a fixed grid of steps
    with seeded noise; the low-variance retention probe."""
    quads = _train_quads(facts)
    if len(quads) == 0:
        raise ContractError("reconstruction loss over zero facts")
    rng = np.random.default_rng(seed)
    grid = sorted({1, schedule.n_steps // 4, schedule.n_steps // 2,
                   (3 * schedule.n_steps) // 4, schedule.n_steps} - {0})
    s, r, o = quads[:, 0], quads[:, 1], quads[:, 2]
    total = 0.0
    for n in grid:
        x0 = ent_emb[o]
        xn = forward_noise(x0, n, schedule, rng)
        tokens = np.stack([ent_emb[s], rel_emb[r], xn], axis=1)
        x0hat, _ = denoiser_forward(dm, tokens, n)
        total += float(((x0hat - x0) ** 2).sum(axis=1).mean())
    return total / len(grid)


def _train_quads(facts):
    """Accept a FactSet or raw array; reject valid/test provenance."""
    split = getattr(facts, "split", None)
    if split is not None and split != "train":
        raise ContractError(f"denoiser training requires train facts, got {split!r}")
    quads = getattr(facts, "quads", facts)
    return np.asarray(quads, dtype=np.int64).reshape(-1, quads.shape[-1] if getattr(quads, "ndim", 2) > 1 else 4)
