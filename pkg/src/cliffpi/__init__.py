"""Clifford analysis toolkit for the Pi operator on conformally flat manifolds."""
from .algebra import Multivector, Paravector, gp, involution, invert_paravector, pq_split
from .geometry import ManifoldSpec, BoxDomain, SphereDomain, build_grid, project, lift, volume_weight

__all__ = [
    "Multivector", "Paravector", "gp", "involution", "invert_paravector", "pq_split",
    "ManifoldSpec", "BoxDomain", "SphereDomain", "build_grid", "project", "lift", "volume_weight",
]
