"""Information backflow and memory-type diagnostics for qubit (and small qudit) dynamical maps."""

__version__ = "0.1.0"

from .certify import (  # noqa: E402
    Certificate,
    is_extremal,
    strong_backflow_certificate,
    verify_decomposition,
    weak_backflow_verdict,
)
from .channels import (  # noqa: E402
    Basis,
    BlochAffine,
    Channel,
    channel_from_bloch,
    channel_from_kraus,
    classical_channel,
    generalized_classical_channel,
    identity_channel,
    is_dio,
    pauli_channel,
    unitary_channel,
)
from .classify import (  # noqa: E402
    check_blp,
    check_block_diagonal_elementary,
    check_coherence_monotone,
    check_cp_divisible,
    check_dio_composition,
    check_elementary,
)
from .dynamics import DynamicalMap, MixtureSpec, mix  # noqa: E402
from .errors import CPTPError, InvalidInputError, UnsupportedDimensionError  # noqa: E402
from .numerics import TimeGrid, configure  # noqa: E402
from .verdict import Status, Verdict  # noqa: E402
from .witness import (  # noqa: E402
    CCState,
    TwoQubitBloch,
    Witness,
    cc_state,
    choi_state,
    optimal_witness,
    refute_type0,
    witness_value,
    x_functional,
)

__all__ = [
    "__version__",
    "Basis", "BlochAffine", "CCState", "CPTPError", "Certificate", "Channel", "DynamicalMap",
    "InvalidInputError", "MixtureSpec", "Status", "TimeGrid", "TwoQubitBloch",
    "UnsupportedDimensionError", "Verdict", "Witness", "cc_state", "channel_from_bloch",
    "channel_from_kraus", "check_blp", "check_block_diagonal_elementary", "check_coherence_monotone",
    "check_cp_divisible", "check_dio_composition", "check_elementary", "choi_state",
    "classical_channel", "configure", "generalized_classical_channel", "identity_channel", "is_dio",
    "is_extremal", "mix", "optimal_witness", "pauli_channel", "refute_type0",
    "strong_backflow_certificate", "unitary_channel", "verify_decomposition",
    "weak_backflow_verdict", "witness_value", "x_functional",
]
