"""Numerical certification of Haantjes-type recursion structures.

A library and CLI for checking whether user-supplied geometric data (an
exact 1-form dA, commuting recursion operators K_1..K_n, optional symmetry
vector field xi) satisfies the integrability laws of the associated
square of 1-forms: torsion conditions, closedness, structure-constant
algebra, WDVV-type Hessian properties, the symmetry-induced flat metric,
and compatibility of the attached quasilinear flows.
"""

__version__ = "0.1.0"

from .chart import ChartBox, sample_points
from .errors import HaantjesError
from .expr import parse_expr, to_source
from .fields import TensorField, Valence, eval_jet2, identity_field
from .jets import Jet
from .manifest import Manifest, load_manifest, loads_manifest

__all__ = [
    "__version__",
    "ChartBox",
    "sample_points",
    "HaantjesError",
    "parse_expr",
    "to_source",
    "TensorField",
    "Valence",
    "eval_jet2",
    "identity_field",
    "Jet",
    "Manifest",
    "load_manifest",
    "loads_manifest",
]
