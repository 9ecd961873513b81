"""mixres: a solver laboratory for elliptic PDEs on the unit cube.

Trains scalar/flux network pairs (mixed residual), single Ritz-energy
networks, and strong-form Galerkin networks on model Dirichlet and Neumann
problems, with analytic jet propagation, certified two-layer approximation
constructions, and Rademacher complexity estimators.
"""

from .activations import RECU, RELU, REQU, Activation, get_activation
from .autodiff import (
    GradientTape,
    Jet,
    JetBatch,
    Network,
    TwoLayerStack,
    VectorJet,
    VectorJetBatch,
    eval_jet,
    eval_vector_jet,
    loss_gradient,
)
from .autodiff.backend import active_backend, compiled_available
from .exceptions import DimensionError, NonFiniteError
from .networks import (
    ResNetSpec,
    TwoLayerSpec,
    init_resnet,
    init_two_layer,
    matched_single_net_width,
    project_two_layer,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "RELU",
    "REQU",
    "RECU",
    "get_activation",
    "ResNetSpec",
    "TwoLayerSpec",
    "init_resnet",
    "init_two_layer",
    "project_two_layer",
    "matched_single_net_width",
    "Network",
    "TwoLayerStack",
    "GradientTape",
    "Jet",
    "JetBatch",
    "VectorJet",
    "VectorJetBatch",
    "eval_jet",
    "eval_vector_jet",
    "loss_gradient",
    "active_backend",
    "compiled_available",
    "DimensionError",
    "NonFiniteError",
    "__version__",
]
