"""Temporal origins of shaped pulses in light-pulse atom interferometers.

Modules
-------
dynamics      two-level propagation of piecewise-constant waveforms
characterize  phase dispersion, dispersion gradient and temporal origin
sensitivity   sensitivity function and scale-factor estimates
sequence      Mach-Zehnder phase, contrast and velocity bias
optimize      GRAPE beamsplitter design with a target origin
doppler       Doppler-compensation schemes and their residual bias
references    pinned reference beamsplitters and their figures of merit
cli           command-line entry point
"""

from .characterize import Role, characterize, dispersion_gradient, temporal_origin
from .constants import G_STANDARD, K_EFF, OMEGA0, T_DEFAULT, T_PI, TAU_BS
from .dynamics import Waveform, rectangular, rectangular_area
from .optimize import OptimizationConfig, flip_reverse, optimize_beamsplitter
from .sequence import mach_zehnder, rectangular_sequence
from .sensitivity import scale_factor_report, sensitivity_function

__version__ = "0.1.0"
