"""Certified Lipschitz constants, entropy numbers and approximation lower bounds
for bounded-weight feed-forward networks."""

from .network import (
    Activation,
    Architecture,
    Grid,
    InputError,
    ParamVector,
    PreconditionError,
    clip,
    embed_wider,
    forward,
    get_activation,
    leaky_relu,
    mixed,
    pack,
    param_count,
    relu,
    scaled_tanh,
    sup_distance,
    unpack,
)

__version__ = "0.1.0"
