"""End-to-end run orchestration: train, measure, and oracle passes.

A run is described by a :class:`RunSettings` tree that mirrors the INI
config sections.  Training alternates sampling, local-energy evaluation,
Jacobian assembly, and a parameter update, first with Adam and then with
MARCH once the Adam phase ends (fixed step count, or automatically when
the windowed energy average stops improving).

Determinism contract: every random stream is derived from (master seed,
stage, step), chain positions and optimizer state live in the
checkpoint, so a resumed run reproduces an uninterrupted one and thread
count does not change exact-mode results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzConfig, BackflowNet
from .checkpoint import load_checkpoint, save_checkpoint
from .determinants import OccupationConfig, SpinSector
from .errors import CheckpointError, ConfigError
from .hamiltonian import parse_fcidump
from .local_energy import (
    SemistochasticConfig,
    energy_estimate,
    local_energy,
)
from .optimizers import (
    AdamState,
    JacobianBatch,
    MarchHyper,
    MarchState,
    WorkerPartition,
    adam_step,
    march_step,
    sgd_gradient,
)
from .oracle import build_dense, dump_fixture, inject_oracle_wavefunction, solve
from .sampler import ChainEnsemble, SamplerConfig, ensemble_rngs
from .spin import (
    OrbitalSet,
    measure_s2_set,
    measure_set_correlation,
    measure_sisj,
)

# Random-stream stages, so no two uses ever share a stream.
STAGE_CHAIN_INIT = 0
STAGE_CHAIN_STEP = 1
STAGE_PARAMS = 2
STAGE_SEMISTOCHASTIC = 3
STAGE_MEASURE = 4

TRACE_COLUMNS = [
    "step",
    "phase",
    "energy",
    "energy_stderr",
    "grad_norm",
    "eta_eff",
    "acceptance_rate",
    "unique_samples",
    "wall_time_s",
]


@dataclass
class OptimizerSettings:
    adam_steps: int = -1
    adam_lr: float = 1e-3
    plateau_window: int = 200
    plateau_tol: float = 1e-4
    march: MarchHyper = field(default_factory=MarchHyper)
    partition: int = 1


@dataclass
class RunSettings:
    fcidump: str
    n_electrons: int
    two_sz: int
    seed: int
    output_dir: str = "run"
    checkpoint_in: str | None = None
    checkpoint_out: str | None = None
    ansatz: AnsatzConfig = field(default_factory=AnsatzConfig)
    batch_size: int = 256
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    local_energy: SemistochasticConfig = field(default_factory=SemistochasticConfig)
    le_threads: int = 1
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    max_steps: int = 500
    summary_window: int = 200
    orbital_sets: list[OrbitalSet] = field(default_factory=list)
    oracle_state: bool = False
    measure_samples: int = 4096

    def validate(self):
        if self.seed is None:
            raise ConfigError("a master seed is mandatory")
        if self.batch_size % self.sampler.n_chains != 0:
            raise ConfigError(
                f"batch_size {self.batch_size} not divisible by "
                f"n_chains {self.sampler.n_chains}"
            )
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")


@dataclass
class TrainResult:
    trace: list[dict]
    summary: dict
    checkpoint_path: str | None


def _load_table(settings: RunSettings):
    try:
        with open(settings.fcidump) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read FCIDUMP {settings.fcidump}: {exc}") from None
    return parse_fcidump(text)


class _PhaseSchedule:
    """Adam -> MARCH switch logic: fixed step count, or plateau of the
    windowed energy mean (improvement below tolerance)."""

    def __init__(self, opt: OptimizerSettings):
        self.opt = opt
        self.history: list[float] = []

    def record(self, energy: float):
        self.history.append(energy)

    def in_adam(self, step: int) -> bool:
        if self.opt.adam_steps >= 0:
            return step <= self.opt.adam_steps
        w = self.opt.plateau_window
        if len(self.history) < 2 * w:
            return True
        recent = float(np.mean(self.history[-w:]))
        previous = float(np.mean(self.history[-2 * w : -w]))
        return (previous - recent) >= self.opt.plateau_tol


def run_train(settings: RunSettings) -> TrainResult:
    settings.validate()
    ints = _load_table(settings)
    sector = SpinSector(settings.n_electrons, settings.two_sz)
    n_so = ints.n_so
    seed = settings.seed
    net = BackflowNet(
        n_so,
        settings.n_electrons,
        settings.ansatz,
        seed=int(
            np.random.SeedSequence((seed, STAGE_PARAMS, 0)).generate_state(1)[0]
        ),
    )
    opt = settings.optimizer
    adam = AdamState.fresh(net.n_params, lr=opt.adam_lr)
    march = MarchState.fresh(net.n_params, opt.march)
    partition = WorkerPartition(opt.partition)
    schedule = _PhaseSchedule(opt)
    start_step = 1
    resume_chain_bits = None
    switch_step = None

    if settings.checkpoint_in:
        header, sections = load_checkpoint(settings.checkpoint_in)
        if header["ansatz"] != settings.ansatz.as_dict() or header["n_so"] != n_so:
            raise CheckpointError(
                "checkpoint architecture does not match the run configuration"
            )
        net.set_flat(sections["params"])
        adam = AdamState(
            m=sections["adam_m"],
            v=sections["adam_v"],
            t=int(header["extra"]["adam_t"]),
            lr=opt.adam_lr,
        )
        march = MarchState(
            m=sections["march_m"],
            v=sections["march_v"],
            g_prev=sections["march_g_prev"],
            g_prev2=sections["march_g_prev2"],
            hyper=opt.march,
        )
        schedule.history = list(sections.get("energy_history", []))
        start_step = int(header["extra"]["step"]) + 1
        resume_chain_bits = header["extra"].get("chain_configs")
        switch_step = header["extra"].get("march_switch_step")

    n_chains, burn_in, thin = settings.sampler.resolved(n_so)
    ensemble = ChainEnsemble(
        net,
        sector,
        ints.n_orb,
        n_chains,
        ensemble_rngs(seed, STAGE_CHAIN_INIT, 0, n_chains),
    )
    if resume_chain_bits is not None:
        ensemble.set_configs(
            [OccupationConfig.from_string(s) for s in resume_chain_bits]
        )
    else:
        ensemble.advance(burn_in)

    rounds = settings.batch_size // n_chains
    theta = net.get_flat()
    trace: list[dict] = []

    for step in range(start_step, settings.max_steps + 1):
        t0 = time.perf_counter()
        ensemble.rngs = ensemble_rngs(seed, STAGE_CHAIN_STEP, step, n_chains)
        batch, acceptance = ensemble.record(thin, rounds)
        le_rng = np.random.default_rng(
            np.random.SeedSequence((seed, STAGE_SEMISTOCHASTIC, step))
        )
        report = local_energy(
            batch, ints, net, settings.local_energy, le_rng, settings.le_threads
        )
        energy, stderr = energy_estimate(report)
        schedule.record(energy)

        _, _, o_unique = net.log_grad_batch(batch.unique)
        jb = JacobianBatch.from_raw(
            batch.expand(o_unique), batch.expand(report.values)
        )
        if switch_step is None and schedule.in_adam(step):
            g = sgd_gradient(jb)
            theta = adam_step(theta, adam, g)
            grad_norm = float(np.linalg.norm(g))
            eta_eff = opt.adam_lr
            phase = "adam"
        else:
            if switch_step is None:
                switch_step = step
            theta, march, info = march_step(theta, march, jb, partition)
            grad_norm = info.grad_norm
            eta_eff = info.eta_eff
            phase = "march"
        net.set_flat(theta)
        ensemble.refresh_amplitudes()
        trace.append(
            {
                "step": step,
                "phase": phase,
                "energy": energy,
                "energy_stderr": stderr,
                "grad_norm": grad_norm,
                "eta_eff": eta_eff,
                "acceptance_rate": acceptance,
                "unique_samples": batch.n_unique,
                "wall_time_s": time.perf_counter() - t0,
            }
        )

    window = min(settings.summary_window, len(trace))
    tail = np.array([row["energy"] for row in trace[-window:]])
    summary = {
        "energy": float(tail.mean()) if window else None,
        "energy_stderr": float(tail.std(ddof=1) / np.sqrt(window))
        if window > 1
        else 0.0,
        "summary_window": window,
        "steps": len(trace),
        "final_step": trace[-1]["step"] if trace else start_step - 1,
        "march_switch_step": switch_step,
        "seed": seed,
        "batch_size": settings.batch_size,
        "fcidump": settings.fcidump,
        "sector": {"n_electrons": settings.n_electrons, "two_sz": settings.two_sz},
    }

    checkpoint_path = settings.checkpoint_out
    if checkpoint_path:
        save_checkpoint(
            checkpoint_path,
            settings.ansatz.as_dict(),
            n_so,
            settings.n_electrons,
            sections={
                "params": theta,
                "adam_m": adam.m,
                "adam_v": adam.v,
                "march_m": march.m,
                "march_v": march.v,
                "march_g_prev": march.g_prev,
                "march_g_prev2": march.g_prev2,
                "energy_history": np.array(schedule.history),
            },
            extra={
                "step": trace[-1]["step"] if trace else start_step - 1,
                "adam_t": adam.t,
                "seed": seed,
                "chain_configs": [c.to_string() for c in ensemble.configs],
                "march_switch_step": switch_step,
            },
        )
    return TrainResult(trace=trace, summary=summary, checkpoint_path=checkpoint_path)


def write_trace_csv(path, trace):
    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in trace:
            fh.write(",".join(repr(row[c]) if not isinstance(row[c], str) else row[c] for c in TRACE_COLUMNS) + "\n")


def load_wavefunction(settings: RunSettings, ints):
    """The measured wavefunction: a trained net, or the exact ground
    state when ``oracle_state`` is set."""
    sector = SpinSector(settings.n_electrons, settings.two_sz)
    if settings.oracle_state:
        spectrum = solve(build_dense(ints, sector))
        return inject_oracle_wavefunction(spectrum, 0)
    if not settings.checkpoint_in:
        raise ConfigError("measurement needs checkpoint_in or oracle_state")
    header, sections = load_checkpoint(settings.checkpoint_in)
    cfg = AnsatzConfig(**header["ansatz"])
    net = BackflowNet(header["n_so"], header["n_elec"], cfg, seed=0)
    net.set_flat(sections["params"])
    return net


def run_measure(settings: RunSettings) -> list[dict]:
    """Energy plus requested spin observables on fresh samples."""
    settings.validate()
    ints = _load_table(settings)
    sector = SpinSector(settings.n_electrons, settings.two_sz)
    wf = load_wavefunction(settings, ints)
    from .sampler import sample

    batch = sample(
        wf,
        sector,
        ints.n_orb,
        settings.measure_samples,
        settings.sampler,
        seed=int(
            np.random.SeedSequence((settings.seed, STAGE_MEASURE, 0)).generate_state(1)[0]
        ),
    )
    le_rng = np.random.default_rng(
        np.random.SeedSequence((settings.seed, STAGE_SEMISTOCHASTIC, 0))
    )
    report = local_energy(
        batch, ints, wf, settings.local_energy, le_rng, settings.le_threads
    )
    energy, stderr = energy_estimate(report)

    def record(name, value, err):
        return {
            "observable": name,
            "value": value,
            "stderr": err,
            "batch_size": batch.size,
            "seed": settings.seed,
        }

    records = [record("energy", energy, stderr)]
    sets = list(settings.orbital_sets)
    for oset in sets:
        for i in oset.orbitals:
            if i >= ints.n_orb:
                raise ConfigError(
                    f"orbital {i} in set {oset.name!r} exceeds n_orb={ints.n_orb}"
                )
        value, err = measure_s2_set(oset, batch, wf)
        records.append(record(f"s2:{oset.name}", value, err))
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            value, err = measure_set_correlation(sets[a], sets[b], batch, wf)
            records.append(
                record(f"spin_corr:{sets[a].name}:{sets[b].name}", value, err)
            )
    return records


def run_oracle(settings: RunSettings, out_path, top_k: int = 8) -> dict:
    """Solve the sector exactly and freeze the result as a fixture."""
    settings.validate()
    with open(settings.fcidump) as fh:
        text = fh.read()
    ints = parse_fcidump(text)
    sector = SpinSector(settings.n_electrons, settings.two_sz)
    spectrum = build_dense(ints, sector)
    return dump_fixture(text, spectrum, out_path, top_k=top_k)
