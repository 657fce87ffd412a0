"""Simulator and analytic calculator for radioactively encoded key distribution.

A sender hides a random bit string in the geometry of a plate of cell
pairs, one cell of each pair carrying a faint radioactive sample; decays
reveal the bits, but only after the plate has reached the receiver.  This
package simulates the honest protocol, the known eavesdropping strategies
with their analytic bounds, classical key distillation, the four-state
qubit variant, and the isotope-production arithmetic behind the scheme.
"""

from .adversary import (
    AttackConfig,
    BoundsReport,
    BrightSourceSpec,
    DetectionResult,
    Estimate,
    EveRecord,
    Strategy,
    auto_replacement_budget,
    bob_detection_test,
    combined_bound,
    eve_opaque,
    eve_translucent,
    intercept_resend_bound,
    prearrival_fraction,
    security_bounds,
    translucent_probability,
)
from .bb84 import Basis, NuclearQubit, SessionResult, bb84_session, measure, prepare
from .decay import (
    CountTable,
    DecayParams,
    SourceParams,
    decay_probability,
    half_life_to_mean_life,
    mean_life_to_half_life,
    sample_decay_time,
    sample_excited_count,
)
from .errors import (
    AssumptionWarning,
    ConfigError,
    ProtocolError,
    ReconciliationError,
    SimulationWarning,
    TruncationWarning,
)
from .isotope import (
    Catalog,
    ContaminantActivity,
    DilutionReport,
    IsotopeSpec,
    ProductionPlan,
    activity_from_irradiation,
    contamination_report,
    dilution_plan,
    nuclei_from_activity,
    required_nuclei,
)
from .postproc import (
    AmplifiedKey,
    HashSeed,
    KeyLedger,
    ReconciliationResult,
    distill_key,
    estimate_error_rate,
    final_key_length,
    privacy_amplify,
    reconcile,
    remove_indices,
    toeplitz_hash,
)
from .protocol import (
    ArrivalReport,
    CellPair,
    DecayPhase,
    DetectorModel,
    Observations,
    ObservationStatus,
    Plate,
    PlateSpec,
    SiftTranscript,
    TimelineParams,
    bob_arrival_check,
    bob_measure,
    classify_events,
    encode_plate,
    sift,
)
from .rng import RngSeed
from .run import (
    RunConfig,
    RunReport,
    SweepResult,
    load_config,
    run_bounds,
    run_simulation,
    run_sweep,
)

__version__ = "0.1.0"
