"""Transformer-backflow wavefunction over occupation configurations.

The network maps a configuration to ``D`` configuration-dependent orbital
matrices: the bitstring is chopped into tokens of ``t`` spin-orbitals,
each token's occupancy pattern picks a learned embedding row, a stack of
post-norm encoder layers mixes the tokens, and per-token MLPs emit the
orbital rows.  Selecting the occupied rows of each matrix gives ``D``
square matrices whose determinants sum to the amplitude.

Everything runs in log domain via signed log-determinants, and all
gradients are reverse-mode by hand so per-sample parameter derivatives
(the Jacobian rows needed by stochastic reconfiguration) come out of one
batched backward pass.  Arithmetic is float64 throughout.

Parameter flattening order (checkpoints and the optimizer depend on it):
token embeddings; then per encoder layer: w_q, w_k, w_v, ln1_gain,
ln1_bias, w_ffn, b_ffn, ln2_gain, ln2_bias; then per token: the hidden
MLP weight/bias pairs followed by w_out, b_out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .determinants import OccupationConfig
from .errors import ZeroAmplitude

LAYERNORM_EPS = 1e-5


@dataclass(frozen=True)
class AnsatzConfig:
    """Architecture hyperparameters with their standard defaults."""

    t: int = 4
    d_f: int = 256
    l_e: int = 2
    n_h: int = 4
    d_atten: int = 256
    l_m: int = 2
    d_mlp: int = 256
    n_det: int = 2

    def __post_init__(self):
        if self.t < 1 or self.n_det < 1 or self.l_e < 0 or self.l_m < 0:
            raise ValueError(f"invalid ansatz sizes: {self}")
        if self.d_atten % self.n_h != 0:
            raise ValueError(
                f"d_atten={self.d_atten} not divisible by n_h={self.n_h}"
            )
        if self.d_atten > self.d_f:
            raise ValueError(
                "d_atten may not exceed d_f (head outputs are zero-padded "
                "into the residual stream)"
            )

    def n_tokens(self, n_so: int) -> int:
        return -(-n_so // self.t)

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "d_f": self.d_f,
            "l_e": self.l_e,
            "n_h": self.n_h,
            "d_atten": self.d_atten,
            "l_m": self.l_m,
            "d_mlp": self.d_mlp,
            "n_det": self.n_det,
        }


@dataclass(frozen=True)
class Amplitude:
    """Signed log representation of one wavefunction value."""

    sign: int
    log_abs: float

    @property
    def is_zero(self) -> bool:
        return self.sign == 0


def tokenize(config: OccupationConfig, cfg: AnsatzConfig) -> list[int]:
    """Token codes of a configuration, zero-padded at the end.

    Within a token, bit k of the code is the occupancy of the k-th
    spin-orbital of the group (little-endian).
    """
    mask = (1 << cfg.t) - 1
    return [
        (config.bits >> (n * cfg.t)) & mask
        for n in range(cfg.n_tokens(config.n_so))
    ]


def tokenize_batch(configs, cfg: AnsatzConfig, n_so: int) -> np.ndarray:
    n_t = cfg.n_tokens(n_so)
    mask = (1 << cfg.t) - 1
    codes = np.empty((len(configs), n_t), dtype=np.int64)
    for b, c in enumerate(configs):
        bits = c.bits
        for n in range(n_t):
            codes[b, n] = (bits >> (n * cfg.t)) & mask
    return codes


def _layernorm_forward(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LAYERNORM_EPS)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv, gain)


def _layernorm_backward(dy, cache):
    """Returns (dx, per-sample d_gain, per-sample d_bias)."""
    xhat, inv, gain = cache
    dgain = (dy * xhat).sum(axis=1)
    dbias = dy.sum(axis=1)
    dxhat = dy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv * (dxhat - m1 - xhat * m2), dgain, dbias


def _split_heads(x, n_h):
    b, t, a = x.shape
    return x.reshape(b, t, n_h, a // n_h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def multi_head_attention(x, w_q, w_k, w_v, n_h):
    """Self-attention with per-head softmax; head outputs are concatenated
    (equivalently, summed after zero-padding each head to its own slice).

    Returns the (B, T, d_atten) output and the cache needed for backward.
    """
    q = _split_heads(x @ w_q, n_h)
    k = _split_heads(x @ w_k, n_h)
    v = _split_heads(x @ w_v, n_h)
    scale = 1.0 / math.sqrt(q.shape[-1])
    logits = (q @ k.transpose(0, 1, 3, 2)) * scale
    logits -= logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    out = _merge_heads(p @ v)
    return out, (q, k, v, p, scale)


def _attention_backward(dout, x, w_q, w_k, w_v, cache):
    q, k, v, p, scale = cache
    n_h = q.shape[1]
    dho = _split_heads(dout, n_h)
    dp = dho @ v.transpose(0, 1, 3, 2)
    dv = p.transpose(0, 1, 3, 2) @ dho
    dlogits = p * (dp - (dp * p).sum(axis=-1, keepdims=True))
    dq = (dlogits @ k) * scale
    dk = (dlogits.transpose(0, 1, 3, 2) @ q) * scale
    dq, dk, dv = (_merge_heads(z) for z in (dq, dk, dv))
    dwq = np.einsum("bti,bta->bia", x, dq)
    dwk = np.einsum("bti,bta->bia", x, dk)
    dwv = np.einsum("bti,bta->bia", x, dv)
    dx = dq @ w_q.T + dk @ w_k.T + dv @ w_v.T
    return dx, dwq, dwk, dwv


def _signed_logsumexp(signs, logs):
    """Combine signed log terms along the last axis.

    Returns (sign, log_abs) arrays; exact cancellation or an all-zero row
    yields sign 0 with log_abs -inf.
    """
    signs = np.asarray(signs, dtype=np.float64)
    logs = np.where(signs == 0.0, -np.inf, logs)
    m = logs.max(axis=-1)
    alive = np.isfinite(m)
    shifted = np.zeros_like(logs)
    shifted[alive] = logs[alive] - m[alive, None]
    s = np.where(alive[..., None], signs * np.exp(shifted), 0.0).sum(axis=-1)
    out_sign = np.sign(s)
    with np.errstate(divide="ignore"):
        out_log = np.where(s != 0.0, m + np.log(np.abs(np.where(s == 0, 1.0, s))), -np.inf)
    return out_sign, out_log


class BackflowNet:
    """All parameters plus batched evaluation and gradient passes.

    The instance is tied to a spin-orbital count and electron number; the
    head width is ``n_det * t * n_elec``.  Parameters are float64 arrays
    in an insertion-ordered dict; ``get_flat``/``set_flat`` expose the
    documented flat layout.
    """

    def __init__(self, n_so: int, n_elec: int, cfg: AnsatzConfig, seed: int = 0):
        if n_elec < 1 or n_elec > n_so:
            raise ValueError(f"bad electron count {n_elec} for n_so={n_so}")
        self.n_so = n_so
        self.n_elec = n_elec
        self.cfg = cfg
        self.n_tokens = cfg.n_tokens(n_so)
        self.params: dict[str, np.ndarray] = {}
        self._init_params(seed)
        self._offsets = {}
        pos = 0
        for name, arr in self.params.items():
            self._offsets[name] = (pos, pos + arr.size)
            pos += arr.size
        self.n_params = pos

    # -- construction -------------------------------------------------

    def _init_params(self, seed):
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        cfg = self.cfg
        t, f, a = cfg.t, cfg.d_f, cfg.d_atten
        head_out = cfg.n_det * t * self.n_elec

        def uniform(shape, fan_in):
            lim = 1.0 / math.sqrt(fan_in)
            return rng.uniform(-lim, lim, size=shape)

        self.params["embed"] = uniform((self.n_tokens, 2**t, f), f)
        for l in range(cfg.l_e):
            self.params[f"enc{l}.w_q"] = uniform((f, a), f)
            self.params[f"enc{l}.w_k"] = uniform((f, a), f)
            self.params[f"enc{l}.w_v"] = uniform((f, a), f)
            self.params[f"enc{l}.ln1_g"] = np.ones(f)
            self.params[f"enc{l}.ln1_b"] = np.zeros(f)
            self.params[f"enc{l}.w_ffn"] = uniform((f, f), f)
            self.params[f"enc{l}.b_ffn"] = np.zeros(f)
            self.params[f"enc{l}.ln2_g"] = np.ones(f)
            self.params[f"enc{l}.ln2_b"] = np.zeros(f)

        # Head biases come from orthonormal columns so the initial
        # determinants are far from singular.
        rows = self.n_tokens * t
        ortho = np.empty((cfg.n_det, rows, self.n_elec))
        for d in range(cfg.n_det):
            mat = rng.standard_normal((rows, max(self.n_elec, 1)))
            qmat, _ = np.linalg.qr(mat)
            ortho[d] = qmat[:, : self.n_elec]
        for n in range(self.n_tokens):
            width_in = f
            for l in range(cfg.l_m):
                self.params[f"tok{n}.w{l}"] = uniform((width_in, cfg.d_mlp), width_in)
                self.params[f"tok{n}.b{l}"] = np.zeros(cfg.d_mlp)
                width_in = cfg.d_mlp
            self.params[f"tok{n}.w_out"] = uniform((width_in, head_out), width_in)
            self.params[f"tok{n}.b_out"] = (
                ortho[:, n * t : (n + 1) * t, :].reshape(head_out).copy()
            )

    # -- flat parameter vector ----------------------------------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for arr in self.params.values()])

    def set_flat(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vec.shape}")
        for name, arr in self.params.items():
            lo, hi = self._offsets[name]
            arr[...] = vec[lo:hi].reshape(arr.shape)

    def param_slice(self, name: str) -> slice:
        lo, hi = self._offsets[name]
        return slice(lo, hi)

    # -- forward -------------------------------------------------------

    def _check_config(self, config: OccupationConfig):
        if config.n_so != self.n_so:
            raise ValueError(f"config has {config.n_so} spin-orbitals, net expects {self.n_so}")
        if config.n_electrons != self.n_elec:
            raise ValueError(
                f"config has {config.n_electrons} electrons, net expects {self.n_elec}"
            )

    def _occ_array(self, configs) -> np.ndarray:
        occ = np.empty((len(configs), self.n_elec), dtype=np.int64)
        for b, c in enumerate(configs):
            self._check_config(c)
            occ[b] = c.occupied_indices()
        return occ

    def _encode(self, codes, want_cache):
        cfg = self.cfg
        x = self.params["embed"][np.arange(self.n_tokens)[None, :], codes]
        layers = []
        for l in range(cfg.l_e):
            w_q = self.params[f"enc{l}.w_q"]
            w_k = self.params[f"enc{l}.w_k"]
            w_v = self.params[f"enc{l}.w_v"]
            attn, att_cache = multi_head_attention(x, w_q, w_k, w_v, cfg.n_h)
            if cfg.d_atten < cfg.d_f:
                pad = np.zeros(x.shape[:2] + (cfg.d_f,))
                pad[..., : cfg.d_atten] = attn
                attn_pad = pad
            else:
                attn_pad = attn
            r1 = x + attn_pad
            h1, ln1_cache = _layernorm_forward(
                r1, self.params[f"enc{l}.ln1_g"], self.params[f"enc{l}.ln1_b"]
            )
            fpre = h1 @ self.params[f"enc{l}.w_ffn"] + self.params[f"enc{l}.b_ffn"]
            fact = np.maximum(fpre, 0.0)
            r2 = h1 + fact
            x_next, ln2_cache = _layernorm_forward(
                r2, self.params[f"enc{l}.ln2_g"], self.params[f"enc{l}.ln2_b"]
            )
            if want_cache:
                layers.append((x, att_cache, ln1_cache, h1, fpre, ln2_cache))
            x = x_next
        return x, layers

    def _token_heads(self, xt, want_cache):
        """Per-token MLPs; returns (B, n_det, rows, n_elec) and caches."""
        cfg = self.cfg
        bsz = xt.shape[0]
        rows = self.n_tokens * cfg.t
        out = np.empty((bsz, self.n_tokens, cfg.n_det * cfg.t * self.n_elec))
        caches = []
        for n in range(self.n_tokens):
            h = xt[:, n, :]
            pres = []
            hiddens = [h]
            for l in range(cfg.l_m):
                pre = h @ self.params[f"tok{n}.w{l}"] + self.params[f"tok{n}.b{l}"]
                h = np.maximum(pre, 0.0)
                pres.append(pre)
                hiddens.append(h)
            out[:, n, :] = h @ self.params[f"tok{n}.w_out"] + self.params[f"tok{n}.b_out"]
            if want_cache:
                caches.append((pres, hiddens))
        mats = (
            out.reshape(bsz, self.n_tokens, cfg.n_det, cfg.t, self.n_elec)
            .transpose(0, 2, 1, 3, 4)
            .reshape(bsz, cfg.n_det, rows, self.n_elec)
        )
        return mats[:, :, : self.n_so, :], caches

    def _forward(self, configs, want_cache):
        codes = tokenize_batch(configs, self.cfg, self.n_so)
        occ = self._occ_array(configs)
        xt, enc_cache = self._encode(codes, want_cache)
        amats, tok_cache = self._token_heads(xt, want_cache)
        sub = np.take_along_axis(amats, occ[:, None, :, None], axis=2)
        dets_sign, dets_log = np.linalg.slogdet(sub)
        sign, log_abs = _signed_logsumexp(dets_sign, dets_log)
        cache = None
        if want_cache:
            cache = {
                "codes": codes,
                "occ": occ,
                "xt": xt,
                "enc": enc_cache,
                "tok": tok_cache,
                "sub": sub,
                "dets_sign": dets_sign,
                "dets_log": dets_log,
                "sign": sign,
                "log_abs": log_abs,
            }
        return sign, log_abs, cache

    def amplitude_batch(self, configs):
        """Signs and log magnitudes for a sequence of configs."""
        if len(configs) == 0:
            return np.zeros(0), np.zeros(0)
        sign, log_abs, _ = self._forward(configs, want_cache=False)
        return sign, log_abs

    def amplitude(self, config: OccupationConfig) -> Amplitude:
        sign, log_abs = self.amplitude_batch([config])
        return Amplitude(int(sign[0]), float(log_abs[0]))

    def orbital_matrices(self, config: OccupationConfig) -> np.ndarray:
        """The n_det stacked (n_so, n_elec) orbital matrices for one config."""
        codes = tokenize_batch([config], self.cfg, self.n_so)
        xt, _ = self._encode(codes, want_cache=False)
        amats, _ = self._token_heads(xt, want_cache=False)
        return amats[0]

    def encode_tokens(self, config: OccupationConfig) -> np.ndarray:
        """Encoder output features, one row per token."""
        codes = tokenize_batch([config], self.cfg, self.n_so)
        xt, _ = self._encode(codes, want_cache=False)
        return xt[0]

    # -- backward ------------------------------------------------------

    def log_grad_batch(self, configs):
        """Per-sample gradient rows of log|psi| wrt the flat parameters.

        Returns (signs, log_abs, jacobian) with jacobian shaped
        (len(configs), n_params).  Raises ZeroAmplitude if any config has
        an exactly zero amplitude.
        """
        sign, log_abs, cache = self._forward(configs, want_cache=True)
        if np.any(sign == 0):
            bad = int(np.nonzero(sign == 0)[0][0])
            raise ZeroAmplitude(f"zero amplitude at batch index {bad}")
        cfg = self.cfg
        bsz = len(configs)
        jac = np.zeros((bsz, self.n_params))

        def put(name, grad):
            lo, hi = self._offsets[name]
            jac[:, lo:hi] = grad.reshape(bsz, -1)

        # det-sum adjoint: d log|psi| / d sub[d] = w_d * inv(sub_d)^T
        dets_sign, dets_log = cache["dets_sign"], cache["dets_log"]
        with np.errstate(invalid="ignore"):
            coef = dets_sign * sign[:, None] * np.exp(
                np.where(dets_sign == 0.0, -np.inf, dets_log) - log_abs[:, None]
            )
        coef = np.nan_to_num(coef, nan=0.0, posinf=0.0, neginf=0.0)
        sub = cache["sub"]
        dsub = np.zeros_like(sub)
        alive = dets_sign != 0.0
        if np.any(alive):
            inv = np.linalg.inv(sub[alive])
            dsub[alive] = coef[alive][:, None, None] * np.swapaxes(inv, -1, -2)

        rows = self.n_tokens * cfg.t
        damats_full = np.zeros((bsz, cfg.n_det, rows, self.n_elec))
        occ = cache["occ"]
        np.put_along_axis(
            damats_full[:, :, : self.n_so, :], occ[:, None, :, None], dsub, axis=2
        )

        dout_tok = (
            damats_full.reshape(bsz, cfg.n_det, self.n_tokens, cfg.t, self.n_elec)
            .transpose(0, 2, 1, 3, 4)
            .reshape(bsz, self.n_tokens, -1)
        )

        dxt = np.empty((bsz, self.n_tokens, cfg.d_f))
        for n in range(self.n_tokens):
            pres, hiddens = cache["tok"][n]
            d = dout_tok[:, n, :]
            put(f"tok{n}.w_out", np.einsum("bi,bo->bio", hiddens[-1], d))
            put(f"tok{n}.b_out", d)
            dh = d @ self.params[f"tok{n}.w_out"].T
            for l in range(cfg.l_m - 1, -1, -1):
                dpre = dh * (pres[l] > 0.0)
                put(f"tok{n}.w{l}", np.einsum("bi,bo->bio", hiddens[l], dpre))
                put(f"tok{n}.b{l}", dpre)
                dh = dpre @ self.params[f"tok{n}.w{l}"].T
            dxt[:, n, :] = dh

        dx = dxt
        for l in range(cfg.l_e - 1, -1, -1):
            x_in, att_cache, ln1_cache, h1, fpre, ln2_cache = cache["enc"][l]
            dr2, dg2, db2 = _layernorm_backward(dx, ln2_cache)
            put(f"enc{l}.ln2_g", dg2)
            put(f"enc{l}.ln2_b", db2)
            dfpre = dr2 * (fpre > 0.0)
            put(f"enc{l}.w_ffn", np.einsum("bti,bto->bio", h1, dfpre))
            put(f"enc{l}.b_ffn", dfpre.sum(axis=1))
            dh1 = dr2 + dfpre @ self.params[f"enc{l}.w_ffn"].T
            dr1, dg1, db1 = _layernorm_backward(dh1, ln1_cache)
            put(f"enc{l}.ln1_g", dg1)
            put(f"enc{l}.ln1_b", db1)
            dattn = dr1[..., : cfg.d_atten]
            dx_in, dwq, dwk, dwv = _attention_backward(
                dattn,
                x_in,
                self.params[f"enc{l}.w_q"],
                self.params[f"enc{l}.w_k"],
                self.params[f"enc{l}.w_v"],
                att_cache,
            )
            put(f"enc{l}.w_q", dwq)
            put(f"enc{l}.w_k", dwk)
            put(f"enc{l}.w_v", dwv)
            dx = dr1 + dx_in

        dembed = np.zeros((bsz, self.n_tokens, 2**cfg.t, cfg.d_f))
        np.put_along_axis(
            dembed, cache["codes"][:, :, None, None], dx[:, :, None, :], axis=2
        )
        put("embed", dembed)
        return sign, log_abs, jac

    def log_grad(self, config: OccupationConfig):
        """(Amplitude, gradient vector) for a single config."""
        sign, log_abs, jac = self.log_grad_batch([config])
        return Amplitude(int(sign[0]), float(log_abs[0])), jac[0]


class DictWavefunction:
    """Amplitude provider backed by an explicit coefficient table.

    Anything outside the table has amplitude zero.  Satisfies the same
    evaluation interface as :class:`BackflowNet` (``amplitude`` and
    ``amplitude_batch``), which is all the sampler and estimators need.
    """

    def __init__(self, coefficients: dict[OccupationConfig, float], n_so: int):
        self.n_so = n_so
        self._table = {c.bits: float(v) for c, v in coefficients.items()}

    def amplitude(self, config: OccupationConfig) -> Amplitude:
        val = self._table.get(config.bits, 0.0)
        if val == 0.0:
            return Amplitude(0, -np.inf)
        return Amplitude(1 if val > 0 else -1, math.log(abs(val)))

    def amplitude_batch(self, configs):
        signs = np.zeros(len(configs))
        logs = np.full(len(configs), -np.inf)
        for i, c in enumerate(configs):
            amp = self.amplitude(c)
            signs[i] = amp.sign
            if amp.sign != 0:
                logs[i] = amp.log_abs
        return signs, logs
