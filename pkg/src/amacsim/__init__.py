"""Asynchronous multiple-access channels: rate regions and Monte Carlo validation."""

from amacsim.infocore import (
    Distribution,
    DmcChannel,
    JointSystem,
    ProductInput,
    ValidationError,
    conditional_mutual_information,
    entropy,
    information_density_sum,
    output_distribution,
    stage_channel,
)

__version__ = "0.1.0"

__all__ = [
    "Distribution",
    "DmcChannel",
    "JointSystem",
    "ProductInput",
    "ValidationError",
    "conditional_mutual_information",
    "entropy",
    "information_density_sum",
    "output_distribution",
    "stage_channel",
    "__version__",
]
