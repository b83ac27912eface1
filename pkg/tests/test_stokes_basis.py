import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_points_in
from stokes_lagrange.errors import EvaluationAtSingularity, OffsetTooLarge, TooCloseToSingularity
from stokes_lagrange.geometry import Domain, JordanCurve, SigmaArc
from stokes_lagrange.stokes_basis import (
    SOURCE,
    STOKESLET,
    StokesBasis,
    eval_gradient,
    eval_pressure,
    eval_velocity,
    place_sources,
    pressure_mean,
    single_element,
    stokes_residual,
)


@pytest.fixture(scope="module")
def disk_basis(disk):
    return place_sources(disk, 32, 0.3)


def test_place_sources_disk(disk):
    b = place_sources(disk, 32, 0.3)
    assert b.n_elements == 32 and b.n_columns == 64
    assert np.allclose(np.linalg.norm(b.locations, axis=1), 1.3, atol=1e-3)
    assert set(b.regions) == {-1}


def test_place_sources_annulus(annulus):
    b = place_sources(annulus, [16, 16], 0.15)
    hole = b.locations[np.array(b.regions) == 0]
    stokeslets = hole[:-1]
    assert len(stokeslets) == 16
    assert np.allclose(np.linalg.norm(stokeslets, axis=1), 0.15, atol=1e-3)
    assert b.kinds[-1] == SOURCE
    assert np.allclose(hole[-1], 0.0, atol=1e-9)


def test_place_sources_offset_too_large(annulus):
    with pytest.raises(OffsetTooLarge):
        place_sources(annulus, 16, [0.3, 0.5])


def test_sources_outside_domain(annulus):
    b = place_sources(annulus, 24)
    assert not np.any(annulus.inside(b.locations))


def test_stokeslet_values():
    b = single_element((0.0, 0.0))
    assert np.allclose(eval_velocity(b, [1.0, 0.0], np.array([1.0, 0.0])),
                       [1 / (4 * math.pi), 0.0], atol=1e-15)
    assert np.allclose(eval_velocity(b, [1.0, 0.0], np.array([0.0, 1.0])), 0.0, atol=1e-15)
    assert eval_pressure(b, [1.0, 0.0], np.array([1.0, 0.0])) == pytest.approx(1 / (2 * math.pi))


def test_zero_coefficients(disk_basis, rng):
    x = rng.uniform(-0.5, 0.5, (10, 2))
    c = np.zeros(disk_basis.n_columns)
    assert np.all(eval_velocity(disk_basis, c, x) == 0)
    assert np.all(eval_gradient(disk_basis, c, x) == 0)
    assert np.all(eval_pressure(disk_basis, c, x) == 0)
    mom, div = stokes_residual(disk_basis, c, x)
    assert np.all(mom == 0) and np.all(div == 0)


def test_point_source_values():
    b = single_element((0.0, 0.0), SOURCE)
    G = eval_gradient(b, [1.0], np.array([1.0, 0.0]))
    assert np.allclose(G, [[-1 / (2 * math.pi), 0], [0, 1 / (2 * math.pi)]], atol=1e-14)
    assert eval_pressure(b, [1.0], np.array([0.3, 0.7])) == 0.0
    h = 1e-5
    fd = np.column_stack([
        (eval_velocity(b, [1.0], np.array([1 + h, 0.0])) - eval_velocity(b, [1.0], np.array([1 - h, 0.0]))) / (2 * h),
        (eval_velocity(b, [1.0], np.array([1.0, h])) - eval_velocity(b, [1.0], np.array([1.0, -h]))) / (2 * h),
    ])
    assert np.allclose(fd, G, atol=1e-7)


def test_point_source_flux():
    b = single_element((0.0, 0.0), SOURCE)
    for center, expected in (((0.0, 0.0), 1.0), ((2.0, 0.0), 0.0)):
        c = JordanCurve.circle(center, 0.5, m=512)
        u = eval_velocity(b, [1.0], c.points)
        f = np.sum(np.einsum("ij,ij->i", u, c.normals) * c.node_weights)
        assert f == pytest.approx(expected, abs=1e-4)


def test_gradient_matches_finite_differences(disk_basis, rng):
    c = rng.standard_normal(disk_basis.n_columns)
    x = rng.uniform(-0.6, 0.6, (20, 2))
    h = 1e-5
    G = eval_gradient(disk_basis, c, x)
    for j, e in enumerate(np.eye(2)):
        fd = (eval_velocity(disk_basis, c, x + h * e) - eval_velocity(disk_basis, c, x - h * e)) / (2 * h)
        assert np.allclose(G[:, :, j], fd, atol=1e-7 * (1 + np.abs(G).max()))


def test_gradient_trace_zero(annulus, rng):
    b = place_sources(annulus, 24)
    c = rng.standard_normal(b.n_columns)
    x = random_points_in(annulus, 100, rng, margin=0.05)
    G = eval_gradient(b, c, x)
    tr = G[:, 0, 0] + G[:, 1, 1]
    assert np.abs(tr).max() <= 1e-12 * (1 + np.abs(G).max())


def test_singularity_errors():
    b = single_element((0.0, 0.0))
    with pytest.raises(EvaluationAtSingularity):
        eval_velocity(b, [1.0, 0.0], np.array([0.0, 1e-13]))
    with pytest.raises(TooCloseToSingularity):
        stokes_residual(b, [1.0, 0.0], np.array([5e-4, 0.0]), h=1e-4)


def test_stokes_residual_far_points(disk_basis, rng):
    x = rng.uniform(-0.6, 0.6, (300, 2))
    for _ in range(3):
        c = rng.standard_normal(disk_basis.n_columns)
        c /= np.linalg.norm(c)
        mom, div = stokes_residual(disk_basis, c, x)
        assert np.linalg.norm(mom, axis=1).max() <= 1e-6
        assert np.abs(div).max() <= 1e-6


@given(st.integers(0, 63), st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
def test_element_divergence_fd(k, x1, x2):
    b = place_sources(Domain(JordanCurve.circle(m=64), sigma=[SigmaArc(0, 0.0, 0.5)]), 32, 0.3)
    c = np.zeros(b.n_columns)
    c[k] = 1.0
    x = np.array([x1, x2])
    _, div = stokes_residual(b, c, x, h=1e-4)
    g = np.linalg.norm(eval_gradient(b, c, x))
    assert abs(div) <= 1e-8 * (1 + g)


@given(st.integers(0, 2**32 - 1))
def test_velocity_linear(seed):
    r = np.random.default_rng(seed)
    b = StokesBasis(r.uniform(1.2, 2.0, (6, 2)) * r.choice([-1, 1], (6, 2)),
                    (STOKESLET,) * 5 + (SOURCE,), (-1,) * 6)
    c1, c2 = r.standard_normal((2, b.n_columns))
    x = r.uniform(-0.8, 0.8, (16, 2))
    lhs = eval_velocity(b, c1 + c2, x)
    rhs = eval_velocity(b, c1, x) + eval_velocity(b, c2, x)
    assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, np.abs(lhs).max())


def test_boundary_flux_without_enclosed_sources(annulus, rng):
    b = place_sources(annulus, 24, hole_sources=False)
    q = annulus.boundary_quadrature()
    for _ in range(3):
        c = rng.standard_normal(b.n_columns)
        c /= np.linalg.norm(c)
        u = eval_velocity(b, c, q.points)
        assert abs(np.sum(np.einsum("ij,ij->i", u, q.normals) * q.weights)) <= 1e-10


def test_pressure_gauge(disk_basis, rng):
    c = rng.standard_normal(disk_basis.n_columns)
    pts = disk_basis.gauge_points()
    p = eval_pressure(disk_basis, c, pts, gauge=True)
    assert abs(p.mean()) <= 1e-12 * (1 + np.abs(p).max())
    raw = eval_pressure(disk_basis, c, pts)
    assert np.allclose(raw - p, pressure_mean(disk_basis, c))


def test_basis_json_round_trip(annulus):
    b = place_sources(annulus, 12)
    b2 = StokesBasis.from_json(b.to_json(), annulus)
    assert np.array_equal(b.locations, b2.locations)
    assert b.kinds == b2.kinds and b.regions == b2.regions
    assert b.source_offset == b2.source_offset
