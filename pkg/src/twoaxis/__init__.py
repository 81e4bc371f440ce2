"""Two-axis collective-spin phase estimation with one-axis-twisted probes."""
from .spin import (
    DickeState,
    HusimiGrid,
    MeasurementDistribution,
    NumericalInstabilityError,
    SpinAxis,
    collective_operator_matrix,
    expectation,
    husimi_grid,
    measurement_distribution,
    one_axis_twist,
    prepare_coherent_x,
    rotate,
    sample,
    variance,
)

__version__ = "0.1.0"
