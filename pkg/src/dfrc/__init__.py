"""Joint constant-modulus waveform and receive-filter design for MIMO dual-function
radar-communication systems."""

from .comms import QAM8, QPSK, CommSpec, Constellation, make_comm_spec
from .detect import detection_probability, erfc, erfcinv
from .model import ArrayConfig, Scenario, Waveform, beampattern, lfm_waveform, sinr, sinr_optimal
from .solver import DesignResult, SolverParams, design

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig", "CommSpec", "Constellation", "DesignResult", "QAM8", "QPSK", "Scenario",
    "SolverParams", "Waveform", "beampattern", "design", "detection_probability", "erfc",
    "erfcinv", "lfm_waveform", "make_comm_spec", "sinr", "sinr_optimal",
]
