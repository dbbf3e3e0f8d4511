"""Coupling of a polar molecular rotor to the normal modes of a trapped-ion crystal."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketError,
    ConvergenceError,
    DomainError,
    InstabilityError,
    NonEquilibriumWarning,
    NumericalError,
    ResonanceError,
    RotorPhononError,
    ValidationError,
)
from .crystal import (  # noqa: E402
    BranchTracking,
    CrystalConfig,
    EquilibriumResult,
    ModeSet,
    NormalMode,
    ParticleSpec,
    TrapConfig,
    classify_modes,
    equilibrium_positions,
    hessian,
    normal_modes,
    potential_energy,
    track_branches,
    trap_potential,
)
from .coupling import (  # noqa: E402
    ModeCoupling,
    RotorProperties,
    coupling_rate,
    field_scale,
    mode_couplings,
    rotational_constant_sphere,
    rotor_matrix_element,
)
from .spectrum import (  # noqa: E402
    BasisTruncation,
    DressedSpectrum,
    ProductLabel,
    ShiftResult,
    build_single_mode_hamiltonian,
    convergence_check,
    dressed_spectrum,
    pt_shift_mode,
    pt_shift_total,
    resonant_splitting_l0,
    resonant_splitting_two_level,
    shift_result,
    sideband_shift,
    symmetric_eigen,
)
from .scan import (  # noqa: E402
    CrossingResult,
    ResonanceResult,
    Scenario,
    ScanSpec,
    ScanTable,
    avoided_crossing_gap,
    detect_avoided_crossings,
    find_resonance,
    resonant_half_splittings,
    run_scan,
)
from .config import RunConfig, parse_config, serialize_config  # noqa: E402
from .io import ResultEnvelope, read_table_json, write_table  # noqa: E402
