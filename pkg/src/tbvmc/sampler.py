"""Metropolis-Hastings sampling of configurations from psi^2.

Chains live in a fixed (electron number, Sz) sector and move by the
random-hopping proposal: pick an electron uniformly at random among those
whose spin channel has at least one vacancy, then pick a target vacancy
of the same channel uniformly.  Both choices are uniform in either
direction, so the proposal is symmetric and the acceptance ratio is just
|psi(x')|^2 / |psi(x)|^2, evaluated in log domain.

Every chain owns a private random stream derived from the master seed, so
results are reproducible and independent of how chains are batched.
``propose_hop``/``metropolis_step`` are the single-chain reference
implementation; :class:`ChainEnsemble` advances all chains in lockstep
with vectorized proposals and an amplitude cache keyed by bitstring,
which pays off heavily when the sector is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .determinants import OccupationConfig, SpinSector
from .errors import FrozenSector, ZeroAmplitude

MAX_INIT_TRIES = 100


@dataclass(frozen=True)
class SamplerConfig:
    """Chain layout; ``None`` fields default to multiples of n_so."""

    n_chains: int = 64
    burn_in: int | None = None
    thin: int | None = None

    def resolved(self, n_so: int) -> tuple[int, int, int]:
        burn = 10 * n_so if self.burn_in is None else self.burn_in
        thin = n_so if self.thin is None else self.thin
        return self.n_chains, burn, max(1, thin)


@dataclass
class ChainState:
    """One Markov chain: current config, cached amplitude, private rng."""

    current: OccupationConfig
    sign: float
    log_abs: float
    rng: np.random.Generator


@dataclass
class SampleBatch:
    """A batch of B draws compacted into unique configs with counts."""

    configs: list
    unique: list
    counts: np.ndarray
    signs: np.ndarray
    log_abs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.configs)

    @property
    def n_unique(self) -> int:
        return len(self.unique)

    def expand(self, values: np.ndarray) -> np.ndarray:
        """Repeat per-unique values out to one entry per sample."""
        return np.repeat(np.asarray(values), self.counts, axis=0)

    @classmethod
    def from_draws(cls, configs, signs, logs):
        uniq: dict[int, int] = {}
        unique, counts, usigns, ulogs = [], [], [], []
        for c, s, l in zip(configs, signs, logs):
            slot = uniq.get(c.bits)
            if slot is None:
                uniq[c.bits] = len(unique)
                unique.append(c)
                counts.append(1)
                usigns.append(s)
                ulogs.append(l)
            else:
                counts[slot] += 1
        return cls(
            configs=list(configs),
            unique=unique,
            counts=np.array(counts, dtype=np.int64),
            signs=np.array(usigns),
            log_abs=np.array(ulogs),
        )


def random_sector_config(
    sector: SpinSector, n_spatial: int, rng: np.random.Generator
) -> OccupationConfig:
    """Uniformly random configuration of the sector."""
    bits = 0
    for i in rng.choice(n_spatial, size=sector.n_alpha, replace=False):
        bits |= 1 << (2 * int(i))
    for i in rng.choice(n_spatial, size=sector.n_beta, replace=False):
        bits |= 1 << (2 * int(i) + 1)
    return OccupationConfig(bits, 2 * n_spatial)


def _movable_channels(n_orb: int, n_alpha: int, n_beta: int):
    movable = []
    for spin, count in ((0, n_alpha), (1, n_beta)):
        if 0 < count < n_orb:
            movable.append((spin, count, n_orb - count))
    return movable


def propose_hop(config: OccupationConfig, rng: np.random.Generator) -> OccupationConfig:
    """Move one electron to a same-spin vacancy, both chosen uniformly."""
    n_orb = config.n_so // 2
    movable = _movable_channels(n_orb, config.n_alpha, config.n_beta)
    if not movable:
        raise FrozenSector(f"no move possible from {config.to_string()}")
    pick = int(rng.integers(sum(m[1] for m in movable)))
    spin, count, _ = movable[0]
    if pick >= count:
        pick -= count
        spin, count, _ = movable[1]
    occupied = config.channel_spatial(spin)
    source_spatial = occupied[pick]
    occ_set = set(occupied)
    vacancies = [i for i in range(n_orb) if i not in occ_set]
    target_spatial = vacancies[int(rng.integers(len(vacancies)))]
    return config.move(2 * source_spatial + spin, 2 * target_spatial + spin)


def _accept(sign_cur, log_cur, sign_prop, log_prop, rng) -> bool:
    """Metropolis rule in log domain; the uniform is always consumed so
    chain streams advance identically whatever the outcome."""
    u = rng.random()
    if sign_prop == 0:
        return False
    if sign_cur == 0:
        return True
    return u < min(1.0, np.exp(2.0 * (log_prop - log_cur)))


def metropolis_step(chain: ChainState, net) -> tuple[ChainState, bool]:
    """Advance one chain one step; returns the new state and accept flag."""
    proposal = propose_hop(chain.current, chain.rng)
    amp = net.amplitude(proposal)
    if _accept(chain.sign, chain.log_abs, amp.sign, amp.log_abs, chain.rng):
        return ChainState(proposal, amp.sign, amp.log_abs, chain.rng), True
    return chain, False


class ChainEnsemble:
    """All chains advanced in lockstep with batched amplitude evaluation.

    Chain occupancies are mirrored in boolean (chain, orbital) matrices
    per spin channel so proposals vectorize; each chain still consumes
    only its own stream (one block of three uniforms per step: electron
    choice, vacancy choice, acceptance).  Amplitudes are cached per
    bitstring until the next parameter update.
    """

    def __init__(self, net, sector: SpinSector, n_spatial: int, n_chains: int, rngs):
        if len(rngs) != n_chains:
            raise ValueError("one rng stream per chain required")
        self.net = net
        self.sector = sector
        self.n_spatial = n_spatial
        self.n_so = 2 * n_spatial
        self.rngs = list(rngs)
        self._movable = _movable_channels(n_spatial, sector.n_alpha, sector.n_beta)
        if not self._movable:
            raise FrozenSector(f"sector {sector} admits no hops")
        self.bits = [0] * n_chains
        self.signs = np.zeros(n_chains)
        self.logs = np.full(n_chains, -np.inf)
        self._occ = np.zeros((2, n_chains, n_spatial), dtype=bool)
        self._config_cache: dict[int, OccupationConfig] = {}
        self._amp_cache: dict[int, tuple[float, float]] = {}
        self._initialize()

    @property
    def n_chains(self) -> int:
        return len(self.rngs)

    def _config(self, bits: int) -> OccupationConfig:
        config = self._config_cache.get(bits)
        if config is None:
            config = OccupationConfig(bits, self.n_so)
            self._config_cache[bits] = config
        return config

    @property
    def configs(self) -> list[OccupationConfig]:
        return [self._config(b) for b in self.bits]

    def _amplitudes(self, bits_list):
        """Cached signs/logs for a list of bitstrings."""
        missing = []
        for b in bits_list:
            if b not in self._amp_cache and b not in missing:
                missing.append(b)
        if missing:
            signs, logs = self.net.amplitude_batch([self._config(b) for b in missing])
            for b, s, l in zip(missing, signs, logs):
                self._amp_cache[b] = (float(s), float(l))
        out_s = np.empty(len(bits_list))
        out_l = np.empty(len(bits_list))
        for i, b in enumerate(bits_list):
            out_s[i], out_l[i] = self._amp_cache[b]
        return out_s, out_l

    def _adopt(self, chain: int, bits: int):
        self.bits[chain] = bits
        config = self._config(bits)
        for spin in (0, 1):
            row = self._occ[spin, chain]
            row[:] = False
            row[list(config.channel_spatial(spin))] = True

    def _initialize(self):
        pending = list(range(self.n_chains))
        for _ in range(MAX_INIT_TRIES):
            drafts = [
                random_sector_config(self.sector, self.n_spatial, self.rngs[c])
                for c in pending
            ]
            signs, logs = self._amplitudes([d.bits for d in drafts])
            still = []
            for j, c in enumerate(pending):
                if signs[j] != 0:
                    self._adopt(c, drafts[j].bits)
                    self.signs[c] = signs[j]
                    self.logs[c] = logs[j]
                else:
                    still.append(c)
            pending = still
            if not pending:
                return
        raise ZeroAmplitude(
            f"{len(pending)} chains found no nonzero-amplitude start "
            f"after {MAX_INIT_TRIES} tries"
        )

    def set_configs(self, configs):
        """Restore chain positions (checkpoint resume); amplitudes refresh."""
        if len(configs) != self.n_chains:
            raise ValueError("config count does not match chain count")
        self._amp_cache.clear()
        for c, config in enumerate(configs):
            self._config_cache[config.bits] = config
            self._adopt(c, config.bits)
        self.signs, self.logs = self._amplitudes(self.bits)

    def refresh_amplitudes(self):
        """Drop cached amplitudes (parameters changed) and re-evaluate."""
        self._amp_cache.clear()
        self.signs, self.logs = self._amplitudes(self.bits)

    def _row_select(self, matrix, ordinal):
        """Row-wise index of the ordinal-th True entry of each row."""
        cum = np.cumsum(matrix, axis=1)
        hit = (cum == (ordinal + 1)[:, None]) & matrix
        return hit.argmax(axis=1)

    def advance(self, n_steps: int) -> tuple[int, int]:
        """Advance every chain ``n_steps``; returns (accepted, proposed)."""
        if n_steps <= 0:
            return 0, 0
        n_chains = self.n_chains
        draws = np.stack(
            [rng.random((n_steps, 3)) for rng in self.rngs], axis=1
        )  # (steps, chains, 3)
        movable = self._movable
        n_pool = sum(m[1] for m in movable)
        accepted = 0
        for step in range(n_steps):
            u_elec, u_vac, u_acc = draws[step].T
            pick = np.minimum((u_elec * n_pool).astype(np.int64), n_pool - 1)
            if len(movable) == 1:
                spins = np.full(n_chains, movable[0][0])
                ordinal = pick
            else:
                count0 = movable[0][1]
                spins = np.where(pick < count0, movable[0][0], movable[1][0])
                ordinal = np.where(pick < count0, pick, pick - count0)
            sources = np.empty(n_chains, dtype=np.int64)
            targets = np.empty(n_chains, dtype=np.int64)
            for spin, count, nvac in movable:
                mask = spins == spin
                if not np.any(mask):
                    continue
                occ = self._occ[spin, mask]
                sources[mask] = self._row_select(occ, ordinal[mask])
                v_ord = np.minimum(
                    (u_vac[mask] * nvac).astype(np.int64), nvac - 1
                )
                targets[mask] = self._row_select(~occ, v_ord)
            prop_bits = [
                (self.bits[c] ^ (1 << (2 * int(sources[c]) + int(spins[c]))))
                | (1 << (2 * int(targets[c]) + int(spins[c])))
                for c in range(n_chains)
            ]
            psigns, plogs = self._amplitudes(prop_bits)
            with np.errstate(over="ignore"):
                ratio = np.exp(2.0 * (plogs - self.logs))
            take = np.where(
                psigns == 0,
                False,
                np.where(self.signs == 0, True, u_acc < ratio),
            )
            for c in np.nonzero(take)[0]:
                c = int(c)
                spin = int(spins[c])
                self.bits[c] = prop_bits[c]
                self._occ[spin, c, int(sources[c])] = False
                self._occ[spin, c, int(targets[c])] = True
                self.signs[c] = psigns[c]
                self.logs[c] = plogs[c]
            accepted += int(take.sum())
        return accepted, n_steps * n_chains

    def record(self, thin: int, rounds: int) -> tuple[SampleBatch, float]:
        """Advance ``thin`` steps per round, recording all chains each
        round; returns the batch and the acceptance rate."""
        draws, dsigns, dlogs = [], [], []
        accepted = proposed = 0
        for _ in range(rounds):
            a, p = self.advance(thin)
            accepted += a
            proposed += p
            draws.extend(self.configs)
            dsigns.extend(self.signs)
            dlogs.extend(self.logs)
        rate = accepted / proposed if proposed else 0.0
        return SampleBatch.from_draws(draws, dsigns, dlogs), rate


def ensemble_rngs(master_seed: int, stage: int, step: int, n_chains: int):
    """Per-chain generators for one (stage, step); reproducible and
    restart-safe because streams depend only on these integers."""
    ss = np.random.SeedSequence((master_seed, stage, step))
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(n_chains)]


def sample(
    net,
    sector: SpinSector,
    n_spatial: int,
    n_samples: int,
    cfg: SamplerConfig = SamplerConfig(),
    seed: int = 0,
) -> SampleBatch:
    """Draw ``n_samples`` configurations from p(x) proportional to psi^2.

    Each chain burns in, then contributes one record every ``thin`` steps
    until the batch is full.  ``n_samples`` must be divisible by the
    chain count.
    """
    n_so = 2 * n_spatial
    n_chains, burn_in, thin = cfg.resolved(n_so)
    if n_samples % n_chains != 0:
        raise ValueError(
            f"n_samples={n_samples} not divisible by n_chains={n_chains}"
        )
    ensemble = ChainEnsemble(
        net, sector, n_spatial, n_chains, ensemble_rngs(seed, 0, 0, n_chains)
    )
    if burn_in:
        ensemble.advance(burn_in)
    batch, _ = ensemble.record(thin, n_samples // n_chains)
    return batch
