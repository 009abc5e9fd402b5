"""Change-point detection in time series through ordinal-pattern turning rates."""

from .cpd import (
    ChangePointReport,
    NullQuantileTable,
    cusum_statistic,
    null_quantiles,
    run_test,
    self_normalizer,
    sn_cusum_statistic,
)
from .estimate import (
    TURNING_PATTERNS,
    TurningRateSeries,
    pattern_frequencies,
    permutation_entropy,
    plug_in_long_run_variance,
    spectral_centroid_check,
    turning_rate,
    turning_rate_series,
)
from .estimators import (
    OrdinalPatternTransformer,
    TurningRateChangeDetector,
    TurningRateTransformer,
)
from .exceptions import (
    ConfigurationError,
    DegenerateInputError,
    InvalidInputError,
    OrdinalCPDError,
)
from .linproc import (
    BreakSpec,
    LinearProcessSpec,
    NoiseSpec,
    TimeSeries,
    farima_coefficients,
    integrate,
    sample_noise,
    simulate_increments,
    simulate_with_break,
)
from .ordpat import (
    Pattern,
    PatternCounts,
    PatternMatrix,
    count_patterns,
    enumerate_patterns,
    pattern_at_via_matrix,
    pattern_matrix,
    pattern_of,
)

__version__ = "0.1.0"
