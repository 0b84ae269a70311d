"""Tomography of biphoton polarization ququarts with optimized plate protocols."""
from .errors import (
    AlreadyCorrected,
    DegenerateInput,
    DegenerateState,
    DomainError,
    EmptyGrid,
    IndexOutOfRange,
    NoCounts,
    TomographyError,
    ZeroVector,
)
from .optics import DispersionModel, Waveplate, biphoton_transform, jones_su2, optical_phase, prepare_product_state
from .protocol import (
    CompletenessReport,
    InstrumentMatrix,
    ProtocolSpec,
    b_matrix,
    completeness,
    instrument_matrix,
    row,
    standard_protocol,
)
from .reconstruction import LossDistribution, MLEOptions, ReconstructionResult, log_likelihood, loss_distribution, mle_reconstruct
from .scan import ScanGrid, find_optimum, scan_info_loss, scan_ratio
from .simulation import (
    CountsDataset,
    accidental_rate,
    expected_rates,
    run_virtual_experiment,
    sample_counts,
    subtract_accidentals,
)
from .states import CoherencyMatrix, PureQuquart, coherency_from_pure, fidelity, information_loss, normalize, parameter_count

__version__ = "0.1.0"
