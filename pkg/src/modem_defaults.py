"""
# modem_defaults.py
# Constants shared across the modem chain: reference link parameters,
# receiver loop coefficients, and the defaults used at desk scale.
"""

# Raised-cosine pulse
# Roll-off of the transmit pulse p(t) and the truncation span in symbols
RC_ROLLOFF = 0.8
RC_SPAN_SYMBOLS = 16

# Simulation sample rate as a multiple of the symbol rate (fs = 8 * fb)
DEFAULT_OVERSAMPLING = 8

# Packet structure
# 1 ms guard on either side of the data burst
GUARD_S = 1e-3
# Full scale packet: 10,000 training / 40,000 decision-directed symbols
FULL_N_TRAIN = 10_000
FULL_N_PAYLOAD = 40_000
# Desk scale packet used by tests and CI
DESK_N_TRAIN = 1_000
DESK_N_PAYLOAD = 4_000

# Preambles
# 13-chip Barker sequence in the printed order (reverse of the usual listing)
BARKER_13 = (1, -1, 1, -1, 1, 1, -1, -1, 1, 1, 1, 1, 1)
# Quadratic chirp duration (10 us)
QUADRATIC_CHIRP_S = 10e-6
# Superimposed up/down hyperbolic chirp duration and lower band floor (fraction of fc)
HYPERBOLIC_CHIRP_S = 100e-6
HYPERBOLIC_FLOOR_FRACTION = 0.1
# Normalized correlation needed to declare a preamble present
SYNC_THRESHOLD = 0.4
# Doppler factors outside this interval are flagged
DOPPLER_RANGE = (0.99, 1.01)

# Equalizer
# Fractionally spaced DFE at 2 samples per symbol, RLS with forgetting factor 0.995
EQ_SPS = 2
EQ_N_FF = 24  # desk default, up to 40
EQ_N_FB = 12  # desk default, up to 40
EQ_MAX_TAPS = 40
RLS_LAMBDA = 0.995
RLS_DELTA = 0.01
# Second-order PLL: theta/phi = (0.0011 - 0.001 z^-1) / (1 - 2 z^-1 + z^-2)
PLL_NUM = (0.0011, -0.001, 0.0)
PLL_DEN = (1.0, -2.0, 1.0)
# Lost-lock detection: mean |e| over the window above factor * constellation RMS
DIVERGENCE_WINDOW = 500
DIVERGENCE_FACTOR = 2.0
# Samples of lead-in kept ahead of the first symbol by the front end (in symbols)
FRONT_END_LEAD_SYMBOLS = 8
# Front-end lowpass stopband attenuation (dB)
FRONT_END_ATTEN_DB = 80.0

# Metrics
MSE_WINDOW = 200
MSE_FLOOR_DB = -100.0

# Channel simulator
# Transducer and attenuation filters are linear-phase FIRs of this length
CHANNEL_FIR_TAPS = 255
# Rational approximation limit for Doppler resampling
RESAMPLE_MAX_DENOMINATOR = 5000
# Interpolator half-length in input samples (scipy defaults to 10)
RESAMPLE_HALF_TAPS = 64

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SYNC = 3
EXIT_DIVERGENCE = 4
EXIT_IO = 5
