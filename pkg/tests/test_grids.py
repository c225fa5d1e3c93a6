import numpy as np
import pytest

from spdelab import grids
from spdelab.grids import (
    DIRICHLET,
    HMINUS1,
    NEUMANN,
    Grid,
    GridFunction,
    VectorField,
    divergence,
    face_difference_matrix,
    gradient,
    inner,
    inner_fields,
    interval_grid,
    laplacian,
    neg_laplacian_matrix,
    norm,
)

rng = np.random.default_rng(101)


def random_zero_flux_field(grid):
    comps = []
    for a in range(grid.dim):
        c = rng.standard_normal(grid.faces_shape(a))
        sl_first = [slice(None)] * grid.dim
        sl_first[a] = 0
        sl_last = [slice(None)] * grid.dim
        sl_last[a] = grid.shape[a]
        c[tuple(sl_first)] = 0.0
        c[tuple(sl_last)] = 0.0
        comps.append(c)
    return VectorField(grid, comps)


def test_inner_constant_one_is_measure_of_domain():
    g = interval_grid(10)
    u = GridFunction(g, np.ones(10))
    assert inner(u, u) == pytest.approx(1.0)


def test_inner_with_zero_vanishes():
    g = interval_grid(17)
    u = GridFunction(g, rng.standard_normal(17))
    z = GridFunction(g, np.zeros(17))
    assert inner(u, z) == 0.0


def test_hminus1_inner_on_first_dirichlet_eigenvector():
    g = interval_grid(64)
    L = neg_laplacian_matrix(g, DIRICHLET).toarray()
    w, V = np.linalg.eigh(L)
    v1 = GridFunction(g, V[:, 0], HMINUS1)
    l2_sq = g.cell_volume * float(V[:, 0] @ V[:, 0])
    assert inner(v1, v1) == pytest.approx(l2_sq / w[0], rel=1e-12)


def test_hminus1_positive_definite():
    g = interval_grid(32)
    for _ in range(5):
        u = GridFunction(g, rng.standard_normal(32), HMINUS1)
        assert inner(u, u) > 0.0


@pytest.mark.parametrize("grid", [interval_grid(64), Grid((1.0, 0.7), (12, 9))])
def test_gradient_divergence_adjointness(grid):
    u = GridFunction(grid, rng.standard_normal(grid.shape))
    F = random_zero_flux_field(grid)
    lhs = inner_fields(gradient(u, NEUMANN), F)
    rhs = -inner(u, divergence(F, NEUMANN))
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


def test_gradient_of_constant_vanishes():
    g = interval_grid(20)
    u = GridFunction(g, np.full(20, 3.0))
    grad = gradient(u, NEUMANN)
    assert np.abs(grad.components[0]).max() == 0.0


def test_gradient_of_ramp_is_one_on_interior_faces():
    g = interval_grid(25)
    u = GridFunction(g, g.axis_centers(0))
    grad = gradient(u, NEUMANN)
    assert grad.components[0][1:-1] == pytest.approx(np.ones(24))


def test_divergence_of_zero_field():
    g = interval_grid(8)
    out = divergence(VectorField.zeros(g), NEUMANN)
    assert np.abs(out.values).max() == 0.0


def test_divergence_of_gradient_matches_second_difference():
    g = interval_grid(12)
    x = g.axis_centers(0)
    u = GridFunction(g, x**2)
    h = g.spacing[0]
    out = divergence(gradient(u, NEUMANN), NEUMANN)
    second = (np.roll(u.values, -1) - 2 * u.values + np.roll(u.values, 1)) / h**2
    assert out.values[1:-1] == pytest.approx(second[1:-1], rel=1e-10)


def test_discrete_divergence_theorem():
    g = Grid((1.0, 1.0), (7, 5))
    F = random_zero_flux_field(g)
    total = g.cell_volume * divergence(F, NEUMANN).values.sum()
    assert total == pytest.approx(0.0, abs=1e-12)


def test_neumann_laplacian_second_order_on_cosine():
    errs = []
    for n in (128, 256):
        g = interval_grid(n)
        x = g.axis_centers(0)
        u = GridFunction(g, np.cos(np.pi * x))
        out = laplacian(u, NEUMANN)
        errs.append(np.abs(out.values + np.pi**2 * u.values).max())
    assert errs[1] < errs[0] / 3.5  # ~O(h^2)
    assert errs[1] < 1e-3 * np.pi**2


def test_dirichlet_eigenvalues_match_formula():
    n = 48
    g = interval_grid(n)
    h = g.spacing[0]
    L = neg_laplacian_matrix(g, DIRICHLET).toarray()
    w = np.sort(np.linalg.eigvalsh(L))
    k = np.arange(1, n + 1)
    pred = np.sort(2.0 * (1.0 - np.cos(k * np.pi / (n + 1))) / h**2)
    assert w == pytest.approx(pred, rel=1e-12)


def test_operators_are_linear():
    g = interval_grid(30)
    u = GridFunction(g, rng.standard_normal(30))
    v = GridFunction(g, rng.standard_normal(30))
    a, b = rng.standard_normal(2)
    for bc in (NEUMANN, DIRICHLET):
        left = laplacian(a * u + b * v, bc).values
        right = a * laplacian(u, bc).values + b * laplacian(v, bc).values
        assert left == pytest.approx(right, abs=1e-10 * (1 + np.abs(right).max()))


def test_face_matrix_consistent_with_gradient():
    g = Grid((1.0, 1.0), (6, 4))
    u = GridFunction(g, rng.standard_normal(g.shape))
    K = face_difference_matrix(g, NEUMANN)
    stacked = K @ u.flat
    grad = gradient(u, NEUMANN)
    manual = np.concatenate([
        grad.components[0][1:-1, :].reshape(-1),
        grad.components[1][:, 1:-1].reshape(-1),
    ])
    assert stacked == pytest.approx(manual)


def test_mismatched_grid_or_tag_raises():
    g1, g2 = interval_grid(8), interval_grid(9)
    u = GridFunction(g1, np.zeros(8))
    v = GridFunction(g2, np.zeros(9))
    with pytest.raises(ValueError):
        inner(u, v)
    w = GridFunction(g1, np.zeros(8), HMINUS1)
    with pytest.raises(ValueError):
        inner(u, w)
    with pytest.raises(ValueError):
        u + w


def test_nonfinite_values_rejected():
    g = interval_grid(4)
    with pytest.raises(ValueError):
        GridFunction(g, [1.0, np.nan, 0.0, 0.0])


def test_h1_inner_includes_gradient_energy():
    g = interval_grid(40)
    x = g.axis_centers(0)
    u = GridFunction(g, np.sin(2 * np.pi * x), "H1")
    l2_part = g.cell_volume * np.sum(u.values**2)
    assert inner(u, u) > l2_part
