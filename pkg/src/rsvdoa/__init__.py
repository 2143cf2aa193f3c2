"""DOA estimation of coherent sources under amplitude-phase errors via
auxiliary-source calibrated steering vectors and frequency-domain sparse
reconstruction (RSV-SR)."""

__version__ = "0.1.0"

from .array_model import (ArrayConfig, ErrorModel, SnapshotMatrix, SourceSpec,
                          corrupted_steering_vector, steering_vector, synthesize_snapshots)
from .calibration import AngularGrid, RsvBasis, calibrate, nominal_basis, normalize, sweep_and_build
from .frequency import (PeakMeasurement, SpectrumMatrix, accumulate_peaks, detect_peaks,
                        dft_all_antennas, inverse_dft)
from .sparse import (DoaEstimate, LassoProblem, MuPolicy, SparseSolution, estimate_doa,
                     extract_top_j, solve_l1)

__all__ = [
    "ArrayConfig", "ErrorModel", "SnapshotMatrix", "SourceSpec", "corrupted_steering_vector",
    "steering_vector", "synthesize_snapshots", "AngularGrid", "RsvBasis", "calibrate",
    "nominal_basis", "normalize", "sweep_and_build", "PeakMeasurement", "SpectrumMatrix",
    "accumulate_peaks", "detect_peaks", "dft_all_antennas", "inverse_dft", "DoaEstimate",
    "LassoProblem", "MuPolicy", "SparseSolution", "estimate_doa", "extract_top_j", "solve_l1",
]
