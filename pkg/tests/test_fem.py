import math

import numpy as np
import pytest

from morphoelastic import tensor as T
from morphoelastic.fem import (Load, MinimizeOptions, energy_gradient, min_elastic_det, minimize_energy,
                               total_energy)
from morphoelastic.hyperelastic import EnergyDensity, GrowthField, piola_with_growth
from morphoelastic.mesh import DIRICHLET, NEUMANN, Mesh, single_tet, unit_cube
from morphoelastic.optim import LineSearchFailure, MaxIterationsError, lbfgs
from morphoelastic.tolerances import GRAD_FD_REL, GRAD_FD_STEP

W1111 = EnergyDensity(1.0, 1.0, 1.0, 4.0)


def test_unit_cube_mesh():
    for n in (1, 2, 3):
        m = unit_cube(n)
        assert m.n_tets == 6 * n**3
        assert np.all(m.signed_volumes > 0)
        assert m.volume == pytest.approx(1.0, rel=1e-14)
        assert np.all(m.vertices[m.dirichlet_nodes, 0] == 0.0)
        neu = m.facet_nodes(NEUMANN)
        assert np.all(m.vertices[neu, 0] == 1.0)
        assert m.facet_areas[m.facet_tags == DIRICHLET].sum() == pytest.approx(1.0)
    boundary = unit_cube(3, dirichlet="all", neumann="").boundary_nodes
    assert len(boundary) == 4**3 - 2**3


def test_mesh_validation():
    m = single_tet()
    with pytest.raises(ValueError):
        Mesh(m.vertices, m.tets[:, [0, 2, 1, 3]], m.facets, m.facet_tags)
    with pytest.raises(ValueError):
        Mesh(m.vertices, m.tets, m.facets, np.zeros_like(m.facet_tags))


def test_gradient_examples(rng):
    m = unit_cube(3)
    assert np.allclose(m.gradient(m.vertices), np.eye(3), atol=1e-14)
    A = rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    assert np.allclose(m.gradient(m.vertices @ A.T + b), A, atol=1e-13)
    y = m.vertices.copy()
    node = 21
    y[node] += [0.01, -0.02, 0.03]
    changed = np.any(np.abs(m.gradient(y) - np.eye(3)) > 0, axis=(1, 2))
    incident = np.any(m.tets == node, axis=1)
    assert np.array_equal(changed, incident)
    # locality against a per-tet direct recomputation
    t = int(np.flatnonzero(incident)[0])
    X = m.vertices[m.tets[t]]
    Y = y[m.tets[t]]
    direct = np.linalg.solve((X[1:] - X[0]), (Y[1:] - Y[0])).T
    assert np.allclose(m.gradient(y)[t], direct, atol=1e-13)


def test_total_energy_examples():
    m = unit_cube(3)
    G = GrowthField.identity(m.n_tets)
    zero = Load().nodal(0.0, m)
    assert total_energy(m.vertices, G, zero, W1111, m) == pytest.approx(10.0, rel=1e-14)
    # f = e3: int f . x over the unit cube is 1/2
    L = Load.constant(f=(0.0, 0.0, 1.0)).nodal(0.0, m)
    assert total_energy(m.vertices, G, L, W1111, m) == pytest.approx(10.0 - 0.5, rel=1e-14)
    # traction e1 on face x = 1: int g . x dA = 1
    L = Load.constant(g=(1.0, 0.0, 0.0)).nodal(0.0, m)
    assert total_energy(m.vertices, G, L, W1111, m) == pytest.approx(9.0, rel=1e-14)
    y = m.vertices.copy()
    y[m.tets[0, 1]] = y[m.tets[0, 0]] - 5 * (y[m.tets[0, 1]] - y[m.tets[0, 0]])
    assert total_energy(y, G, zero, W1111, m) == math.inf


def test_load_rejects_nonfinite():
    m = unit_cube(2)
    with pytest.raises(ValueError):
        Load(body=lambda t, x: np.full_like(x, np.nan)).nodal(0.0, m)


def face_normal(x):
    n = np.zeros_like(x)
    for axis in range(3):
        n[np.isclose(x[:, axis], 1.0), axis] = 1.0
        n[np.isclose(x[:, axis], 0.0), axis] = -1.0
    return n


def test_gradient_manufactured_traction():
    m = unit_cube(3, dirichlet="x0", neumann="all")
    G = GrowthField.identity(m.n_tets)
    P = W1111.DW(np.eye(3))
    load = Load(traction=lambda t, x: face_normal(x) @ P.T)
    g = energy_gradient(m.vertices, G, load.nodal(0.0, m), W1111, m)
    assert np.max(np.abs(g)) <= 1e-12


def test_gradient_homogeneous_interior():
    m = unit_cube(3)
    G = GrowthField.identity(m.n_tets)
    g = energy_gradient(m.vertices, G, Load().nodal(0.0, m), W1111, m)
    interior = np.setdiff1d(np.arange(m.n_vertices), m.boundary_nodes)
    assert np.max(np.abs(g[interior])) <= 1e-12
    assert np.all(g[m.dirichlet_nodes] == 0.0)


def random_state(rng, m, amp=0.04, growth=0.3):
    y = m.vertices + amp * rng.normal(size=m.vertices.shape) * m.free_mask
    G = GrowthField.from_tensors(T.expm(growth * rng.normal(size=(m.n_tets, 3, 3)) / 3))
    return y, G


def test_gradient_finite_differences(rng):
    m = unit_cube(2)
    load = Load.constant((0.3, -0.1, 0.2), (0.0, 0.5, -0.4)).nodal(0.0, m)
    for energy in (EnergyDensity(), W1111):
        for _ in range(10):
            y, G = random_state(rng, m)
            g = energy_gradient(y, G, load, energy, m)
            d = rng.normal(size=y.shape) * m.free_mask
            h = GRAD_FD_STEP
            fd = (total_energy(y + h * d, G, load, energy, m) - total_energy(y - h * d, G, load, energy, m)) / (2 * h)
            assert abs(fd - np.sum(g * d)) <= GRAD_FD_REL * abs(np.sum(g * d))


def test_piola_assembly_matches_elementwise(rng):
    m = single_tet()
    y, G = random_state(rng, m)
    P = piola_with_growth(W1111, m.gradient(y), G)[0]
    g = energy_gradient(y, G, np.zeros((4, 3)), W1111, m)
    expected = m.volumes[0] * P @ m.shape_gradients[0].T
    free = np.setdiff1d(np.arange(4), m.dirichlet_nodes)
    assert np.allclose(g[free], expected.T[free], rtol=1e-13, atol=1e-13)


def test_minimize_identity_is_fixed_point():
    m = unit_cube(2)
    res = minimize_energy(GrowthField.identity(m.n_tets), Load().nodal(0.0, m), m.vertices, EnergyDensity(), m)
    assert res.iterations == 0
    assert np.array_equal(res.y, m.vertices)


def test_minimize_uniform_growth_descends():
    m = unit_cube(3)
    G = GrowthField.from_tensors(np.tile(1.2 * np.eye(3), (m.n_tets, 1, 1)))
    zero = Load().nodal(0.0, m)
    energy = EnergyDensity()
    res = minimize_energy(G, zero, m.vertices, energy, m)
    e0 = total_energy(m.vertices, G, zero, energy, m)
    assert res.energy <= e0
    assert np.all(np.diff(res.energies) <= 0)
    assert np.array_equal(res.y[m.dirichlet_nodes], m.vertices[m.dirichlet_nodes])
    assert min_elastic_det(res.y, G, m) > 0
    g = energy_gradient(res.y, G, zero, energy, m)
    assert np.max(np.abs(g)) <= 1e-8 * max(1.0, abs(e0))


def test_minimize_linear_response():
    m = unit_cube(2)
    energy = EnergyDensity()
    G = GrowthField.identity(m.n_tets)
    disp = []
    for eps in (1e-3, 2e-3):
        load = Load.constant(g=(eps, 0.0, 0.0)).nodal(0.0, m)
        res = minimize_energy(G, load, m.vertices, energy, m)
        disp.append(np.max(np.abs(res.y - m.vertices)))
    assert disp[1] / disp[0] == pytest.approx(2.0, rel=0.05)


def test_minimize_rejects_bad_initial_state():
    m = unit_cube(2)
    G = GrowthField.identity(m.n_tets)
    y = m.vertices + 0.01
    with pytest.raises(ValueError):
        minimize_energy(G, Load().nodal(0.0, m), y, EnergyDensity(), m)


def test_minimize_every_iterate_admissible():
    m = unit_cube(2)
    G = GrowthField.from_tensors(np.tile(np.diag([1.5, 1.0, 0.8]), (m.n_tets, 1, 1)))
    energy = EnergyDensity()
    zero = Load().nodal(0.0, m)
    mask = m.free_mask
    seen = []

    def cb(x, f):
        y = m.vertices.copy()
        y[mask] = x
        seen.append((min_elastic_det(y, G, m), f))

    y0 = m.vertices.copy()
    lbfgs(lambda x: total_energy(np.where(mask, 0, y0) + _scatter(x, mask), G, zero, energy, m),
          lambda x: energy_gradient(np.where(mask, 0, y0) + _scatter(x, mask), G, zero, energy, m)[mask],
          y0[mask], gtol=1e-6, callback=cb)
    assert seen and all(d > 0 and math.isfinite(f) for d, f in seen)
    assert all(b <= a for (_, a), (_, b) in zip(seen, seen[1:]))


def _scatter(x, mask):
    out = np.zeros(mask.shape)
    out[mask] = x
    return out


def test_lbfgs_quadratic_and_errors():
    A = np.diag([1.0, 10.0, 100.0])
    res = lbfgs(lambda x: 0.5 * x @ A @ x, lambda x: A @ x, np.ones(3), gtol=1e-10)
    assert np.max(np.abs(res.x)) < 1e-9
    with pytest.raises(MaxIterationsError):
        lbfgs(lambda x: 0.5 * x @ A @ x, lambda x: A @ x, np.ones(3), gtol=1e-14, max_iter=2)
    with pytest.raises(LineSearchFailure):
        # gradient points the wrong way, so no step can decrease the objective
        lbfgs(lambda x: float(x @ x), lambda x: -2 * x, np.ones(2), gtol=1e-10)


def test_minimize_options_respected():
    m = unit_cube(2)
    G = GrowthField.from_tensors(np.tile(1.3 * np.eye(3), (m.n_tets, 1, 1)))
    with pytest.raises(MaxIterationsError):
        minimize_energy(G, Load().nodal(0.0, m), m.vertices, EnergyDensity(), m, MinimizeOptions(max_iter=3))
