"""Simulation and verification toolkit for random walks on percolation clusters.

Subpackages cover Bernoulli bond percolation on finite boxes, simple random
walks and their visited-site statistics, finite lamplighter (wreath-product)
walks, brute-force isoperimetry, and the analytic bound pipeline that ties
them together.
"""

from percwalk.percolation import (
    LatticeSpec,
    BondConfiguration,
    ClusterGraph,
    sample_bond_config,
    component_of_origin,
    largest_cluster,
    chemical_distance,
    chemical_ball,
)

__all__ = [
    "LatticeSpec",
    "BondConfiguration",
    "ClusterGraph",
    "sample_bond_config",
    "component_of_origin",
    "largest_cluster",
    "chemical_distance",
    "chemical_ball",
]

__version__ = "0.1.0"
