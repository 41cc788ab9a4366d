"""Mixing-SFT towers with windowed marker constraints, correlation
witnesses refined level by level, low-overlap coded-system correlators,
and empirical spectral scans.

The flat namespace below is the supported surface; module paths may move.
"""

__version__ = "0.1.0"

from .errors import (
    AlphabetMismatchError,
    AmbiguousParseError,
    ContractError,
    EmptySubshiftError,
    FillNotFoundError,
    GapBoundExceededError,
    InputError,
    NotInCodedSystemError,
    ResourceCapError,
    SubshiftError,
)
from .words import (
    BINARY,
    PM_ONE,
    Alphabet,
    Word,
    occurrences,
    overlap,
    recurrence_time,
    self_overlap,
)
from .automaton import (
    GapCertificate,
    ShiftAutomaton,
    allowable_words,
    context_states,
    entropy,
    essentialize,
    fill_between,
    find_fill,
    from_forbidden_words,
    full_shift,
    gap_constant,
    is_allowable,
    is_mixing,
    sample_point,
    window_restriction,
)
from .layered import LayeredShift, WindowRule
from .tower import (
    TowerLevel,
    TowerSpec,
    build_minimality_word,
    build_tower,
    default_schedule,
    extend_tower,
    make_base_level,
    validate_schedule,
)
from .witness import (
    SignalSeries,
    WitnessReport,
    build_witness,
    default_checkpoints,
    initial_point,
    refine_level,
    write_checkpoint_csv,
)
from .correlator import (
    CodedPoint,
    CorrelatorPlan,
    build_coded_point,
    evaluate_correlation,
    find_low_overlap_pair,
    make_plan,
    unique_parse,
    write_correlation_csv,
)
from .spectra import (
    SpectralScan,
    looks_rational,
    spectral_scan,
    sturmian_word,
    weyl_average,
)

__all__ = [
    "__version__",
    "Alphabet",
    "Word",
    "BINARY",
    "PM_ONE",
    "overlap",
    "self_overlap",
    "occurrences",
    "recurrence_time",
    "ShiftAutomaton",
    "GapCertificate",
    "full_shift",
    "from_forbidden_words",
    "window_restriction",
    "essentialize",
    "is_allowable",
    "allowable_words",
    "is_mixing",
    "entropy",
    "gap_constant",
    "fill_between",
    "find_fill",
    "context_states",
    "sample_point",
    "WindowRule",
    "LayeredShift",
    "TowerLevel",
    "TowerSpec",
    "default_schedule",
    "validate_schedule",
    "build_minimality_word",
    "make_base_level",
    "extend_tower",
    "build_tower",
    "SignalSeries",
    "WitnessReport",
    "default_checkpoints",
    "initial_point",
    "refine_level",
    "build_witness",
    "write_checkpoint_csv",
    "CorrelatorPlan",
    "CodedPoint",
    "find_low_overlap_pair",
    "make_plan",
    "unique_parse",
    "build_coded_point",
    "evaluate_correlation",
    "write_correlation_csv",
    "SpectralScan",
    "sturmian_word",
    "looks_rational",
    "weyl_average",
    "spectral_scan",
    "SubshiftError",
    "InputError",
    "AlphabetMismatchError",
    "EmptySubshiftError",
    "GapBoundExceededError",
    "FillNotFoundError",
    "ResourceCapError",
    "NotInCodedSystemError",
    "AmbiguousParseError",
    "ContractError",
]
