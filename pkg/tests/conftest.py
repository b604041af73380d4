"""Shared mesh builders for the test suite."""

import numpy as np

from thetaconf.geom import build_mesh


def square_pair_mesh():
    """Unit square split along the 0-2 diagonal."""
    vertices = [0.0, 1.0, 1.0 + 1.0j, 1.0j]
    triangles = [(0, 1, 2), (0, 2, 3)]
    return build_mesh(vertices, triangles)


def diagonal_square_mesh():
    """Two right isoceles triangles over the shared edge (0, 1)."""
    vertices = [0.0, 1.0, 1.0j, 1.0 - 1.0j]
    triangles = [(0, 1, 2), (0, 3, 1)]
    return build_mesh(vertices, triangles)


def equilateral_pair_mesh():
    """Two unit equilateral triangles over the shared edge (0, 1)."""
    s = np.sqrt(3.0) / 2.0
    vertices = [0.0, 1.0, 0.5 + 1j * s, 0.5 - 1j * s]
    triangles = [(0, 1, 2), (0, 3, 1)]
    return build_mesh(vertices, triangles)


def flower_mesh(ring_positions, center=0.0 + 0.0j):
    """Single closed fan: vertex 0 at the center, ring vertices around it."""
    ring_positions = np.asarray(ring_positions, dtype=complex)
    n = ring_positions.size
    vertices = np.concatenate([[complex(center)], ring_positions])
    triangles = [(0, 1 + t, 1 + (t + 1) % n) for t in range(n)]
    return build_mesh(vertices, triangles)


def regular_flower_mesh(valence=6, radius=1.0):
    ring = radius * np.exp(2j * np.pi * np.arange(valence) / valence)
    return flower_mesh(ring)


def random_flower_mesh(rng, valence, min_gap=0.06, radius_sigma=0.25):
    """Random embedded flower: star-shaped with petal angles below pi.

    Consecutive spoke directions differ by an angle in (min_gap, pi -
    min_gap) and radii are log-normal, which makes every petal positive and
    the closed star embedded.
    """
    while True:
        gaps = rng.dirichlet(np.ones(valence)) * 2.0 * np.pi
        if np.all(gaps > min_gap) and np.all(gaps < np.pi - min_gap):
            break
    phi0 = rng.uniform(0.0, 2.0 * np.pi)
    angles = phi0 + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    radii = np.exp(rng.normal(0.0, radius_sigma, valence))
    center = rng.normal() + 1j * rng.normal()
    ring = center + radii * np.exp(1j * angles)
    return flower_mesh(ring, center=center)
