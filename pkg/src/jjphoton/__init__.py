"""Josephson-junction microwave photon counter: simulation and analysis.

Submodules:
    junction   washboard quantities of the detector junction
    escape     thermal and quantum escape rates, ramp switching statistics
    source     thermal cavity photon rates and arrival streams
    detector   stochastic phase dynamics and event-level detection
    stats      waiting-time and counting statistics
    ratefit    rate-versus-temperature fitting
    pat        photon-assisted tunnelling calibration and spectroscopy
    cli        experiment runner
"""

__version__ = "0.1.0"

from .errors import ConfigError, NoBarrierError, NumericalError, ParameterError
from .events import DARK, EventStream
from .junction import JunctionParams

__all__ = [
    "__version__",
    "ConfigError",
    "DARK",
    "EventStream",
    "JunctionParams",
    "NoBarrierError",
    "NumericalError",
    "ParameterError",
]
