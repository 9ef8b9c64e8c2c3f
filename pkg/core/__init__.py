"""
Core-Module für firdiag
"""

__version__ = "1.0.0"

from .measures import (BaseMeasure, EmpiricalMeasure, GaussianMeasure, ProductMeasure,  # noqa: E402
                       ScoreOracle, SubspaceGaussian)
from .estimators import (DiagnosticCurve, EstimateWithError, TauGrid, diagnostic_sweep,  # noqa: E402
                         estimate_fi, estimate_fir_jvp)

__all__ = ['__version__', 'BaseMeasure', 'EmpiricalMeasure', 'GaussianMeasure', 'ProductMeasure',
           'ScoreOracle', 'SubspaceGaussian', 'DiagnosticCurve', 'EstimateWithError', 'TauGrid',
           'diagnostic_sweep', 'estimate_fi', 'estimate_fir_jvp']
