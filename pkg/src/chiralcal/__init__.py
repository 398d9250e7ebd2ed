"""Relative calibration of local chiralities and time arrows with entangled spin pairs."""

from .pauli_core import (
    BlochParams,
    DensityMatrix,
    Spectrum,
    bloch_to_matrix,
    fidelity_with_pure,
    matrix_to_bloch,
    preset_state,
    spectrum,
)
from .witness_maps import (
    FrameMap,
    SeparabilityResult,
    apply_frame_maps,
    separability_test,
    spin_flip,
    time_reversal,
    witness_check,
)
from .sampling import MeasurementRecord, MeasurementSchedule, joint_probability, sample_run
from .tomography import CalibrationVerdict, Estimate, estimate, verdict
from .config import SessionConfig
from .protocol import run_session, run_time_arrow_session

__version__ = "0.1.0"
