"""Transformer-backflow variational Monte Carlo for active-space Hamiltonians.

A second-quantized VMC engine: configuration-dependent orbital matrices
from a transformer encoder feed signed determinants, sampled by
Metropolis-Hastings inside a fixed spin sector and optimized with Adam
followed by MARCH stochastic reconfiguration.  A dense exact-
diagonalization oracle provides ground truth at desk scale.
"""

from .ansatz import Amplitude, AnsatzConfig, BackflowNet, DictWavefunction, tokenize
from .determinants import (
    OccupationConfig,
    SpinSector,
    enumerate_sector,
    excitation_parity,
    sector_dimension,
)
from .hamiltonian import (
    Connection,
    IntegralTable,
    connect,
    diagonal_element,
    parse_fcidump,
    write_fcidump,
)
from .local_energy import (
    LocalEnergyReport,
    SemistochasticConfig,
    energy_estimate,
    local_energy,
    local_energy_exact,
    local_energy_semistochastic,
)
from .optimizers import (
    AdamState,
    JacobianBatch,
    MarchHyper,
    MarchState,
    WorkerPartition,
    adam_step,
    march_step,
    minsr_step,
    sgd_gradient,
)
from .oracle import (
    DenseSpectrum,
    OracleWavefunction,
    build_dense,
    build_dense_by_operator_application,
    ground_state,
    inject_oracle_wavefunction,
)
from .sampler import (
    ChainEnsemble,
    ChainState,
    SampleBatch,
    SamplerConfig,
    metropolis_step,
    propose_hop,
    sample,
)
from .spin import (
    HARTREE_TO_INVCM,
    OrbitalSet,
    SpinStatePoint,
    measure_s2_set,
    measure_set_correlation,
    measure_si2,
    measure_sisj,
    yamaguchi_j,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
