"""IRS-assisted multi-user MISO simulator.

Channel estimation (MMSE and LS under DFT and ON/OFF training schedules),
max-min SINR beamforming via the optimal linear precoder alternated with a
semidefinite-relaxed reflect-vector update, and Monte Carlo experiment
runners with CSV output.
"""

from .maxmin_sdp import BACKEND as solver_backend

__version__ = "0.1.0"
__all__ = ["solver_backend", "__version__"]
