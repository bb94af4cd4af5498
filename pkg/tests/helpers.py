"""Cached domains and solutions shared across test modules."""

import math
from functools import lru_cache

from surfgap.domains import flat_disk, flat_square, make_cap
from surfgap.eigen import assemble, solve_dirichlet
from surfgap.geometry import RoundSphere, revolution_ellipsoid

SPHERE = RoundSphere()
CAP_ANGLES = (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2)


@lru_cache(maxsize=None)
def sphere_cap(theta0):
    return make_cap(SPHERE, theta0=theta0)


@lru_cache(maxsize=None)
def ellipsoid_cap(eps, r0):
    return make_cap(revolution_ellipsoid(eps), r0=r0)


@lru_cache(maxsize=None)
def control(shape):
    return flat_disk(1.0) if shape == "disk" else flat_square(1.0)


@lru_cache(maxsize=None)
def solve(domain, h, k=2):
    ops = assemble(domain.triangulate(h))
    return ops, solve_dirichlet(ops, k)


def cap_solution(theta0, h):
    return solve(sphere_cap(theta0), h)[1]


@lru_cache(maxsize=None)
def cap_field(theta0, h):
    from surfgap.eigen import recover_derivatives

    return recover_derivatives(cap_solution(theta0, h), sphere_cap(theta0).distance_to_boundary)
