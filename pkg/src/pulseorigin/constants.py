"""Physical defaults shared by every module.

All angular frequencies are in rad/s and all times in seconds.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

#: Nominal peak two-photon Rabi frequency, 25 kHz.
OMEGA0 = TWO_PI * 25e3
#: Duration of a rectangular pi/2 pulse at OMEGA0 (10 us).
TAU_BS = np.pi / (2.0 * OMEGA0)
#: Duration of a rectangular pi pulse at OMEGA0.
T_PI = np.pi / OMEGA0
#: Slice duration used by the optimizer (50 slices per pi pulse).
SLICE_DT = 400e-9
#: Counter-propagating Raman effective wave-number on the 85Rb D2 line.
WAVELENGTH = 780.24e-9
K_EFF = 4.0 * np.pi / WAVELENGTH
#: Default interrogation time.
T_DEFAULT = 5e-3
#: Standard gravity, used to express accelerations in g-units.
G_STANDARD = 9.80665
