"""Sampled contraction certificates for gradient flows of nonconvex objectives.

Modules: ``fields`` (objective catalog), ``lognorm`` (matrix measures), ``pli``
(Łojasiewicz-type inequalities), ``curvature`` (concavity scans and envelopes),
``metric`` (conformal contraction metrics), ``flow`` (gradient-flow integration),
``verify`` (certificates) and ``cli`` (batch front-end).
"""
from .certificate import Certificate
from .fields import CallableField, ScalarField, catalog_get, catalog_names
from .metric import ConformalMetric, HypothesisError
from .region import Region, SamplePlan

__version__ = "0.1.0"

__all__ = ["CallableField", "Certificate", "ConformalMetric", "HypothesisError", "Region",
           "SamplePlan", "ScalarField", "catalog_get", "catalog_names", "__version__"]
