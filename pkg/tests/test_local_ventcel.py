import numpy as np
import pytest
import scipy.sparse as sp

from oracles import SmallSubdomain, dense_ventcel_step
from ventcel_oswr.local_ventcel import TransmissionParams, VentcelSubdomain
from ventcel_oswr.mesh import LEFT, RIGHT, InterfaceMesh, SubdomainMesh
from ventcel_oswr.problem import Subdomain
from ventcel_oswr.timegrid import TimeGrid


def vel_own(x, y):
    return 0.7 + 0.3 * y, -0.4 + 0.5 * x


def vel_nb(x, y):
    return 0.2 - 0.1 * y, 0.9 + 0.6 * y


def build(nx, ny, right=True, beta=0.3, alpha=None):
    x0, x1 = (0.0, 0.5) if right else (0.5, 1.2)
    mesh = SubdomainMesh(x0, x1, 0.0, 1.0, nx, ny, interface_face=RIGHT if right else LEFT)
    xg = x1 if right else x0
    iface = InterfaceMesh(xg, np.linspace(0.0, 1.0, ny + 1), mesh.interface_cells, mesh.interface_cells)
    own = Subdomain(omega=0.8, diffusion=(0.6, 1.4), velocity=vel_own)
    nb = Subdomain(omega=1.3, diffusion=(2.0, 0.45), velocity=vel_nb)
    if alpha is None:
        alpha = np.linspace(1.5, 2.5, ny)
    params = TransmissionParams(alpha, beta, "ventcel_one_sided" if beta else "robin")
    sub = VentcelSubdomain(mesh, iface, own, nb, params, send_params=params)
    coeffs = dict(omega=0.8, dxx=0.6, dyy=1.4, vel=vel_own, omega_nb=1.3, d_nb=0.45, vel_nb=vel_nb,
                  alpha=np.broadcast_to(alpha, (ny,)), beta=beta)
    geo = SmallSubdomain(x0, x1, 0.0, 1.0, nx, ny, interface_right=right)
    return sub, geo, coeffs


@pytest.mark.parametrize("nx,ny,right", [(1, 2, True), (1, 2, False), (2, 3, True), (3, 4, False)])
@pytest.mark.parametrize("beta", [0.3, 0.0])
def test_step_matches_dense_hand_assembly(nx, ny, right, beta):
    sub, geo, coeffs = build(nx, ny, right, beta)
    rng = np.random.default_rng(nx * 10 + ny)
    nc = nx * ny
    dt = 0.07
    prev = sub.initial_state()
    prev.c = rng.normal(size=nc)
    prev.lam[sub.mesh.interface_edges] = rng.normal(size=ny)
    zeta = rng.normal(size=ny)

    def source(x, y, t):
        return np.sin(3 * x + t) * np.cos(2 * y)

    new = sub.step(dt, prev, zeta, source, 0.4)
    f_int = sub.source_integrals(source, 0.4)
    ref = dense_ventcel_step(geo, coeffs, dt, prev.c, prev.lam[sub.mesh.interface_edges], zeta, f_int)

    def close(a, b):
        return np.allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(b).max()))

    assert close(new.c, ref["c"])
    assert close(new.flux, ref["flux"])
    assert close(new.phi_gamma, ref["phi_gamma"])
    assert close(new.xi, ref["xi"])
    # multipliers by edge position
    ends = sub.mesh.edge_endpoints.mean(axis=1)
    for e, val in ref["lam"].items():
        t, i, j = e
        if t == "v":
            pos = (geo.x0 + i * geo.hx, geo.y0 + (j + 0.5) * geo.hy)
        else:
            pos = (geo.x0 + (i + 0.5) * geo.hx, geo.y0 + j * geo.hy)
        k = np.flatnonzero(np.all(np.isclose(ends, pos), axis=1))[0]
        assert new.lam[k] == pytest.approx(val, rel=1e-12, abs=1e-12)


def test_source_integrals_match_quadrature():
    sub, _, _ = build(2, 2)
    f = sub.source_integrals(lambda x, y, t: x * y + t, 1.0)
    ll = sub.mesh.cell_lower_left
    h = sub.mesh.hx
    exact = ((ll[:, 0] + h / 2) * (ll[:, 1] + 0.25) + 1.0) * sub.mesh.cell_area
    assert np.allclose(f, exact)


def test_matrix_symmetric_without_advection():
    mesh = SubdomainMesh(0.0, 0.5, 0.0, 1.0, 3, 4, interface_face=RIGHT)
    iface = InterfaceMesh(0.5, np.linspace(0, 1, 5), mesh.interface_cells, mesh.interface_cells)
    own = Subdomain(omega=1.0, diffusion=(1.0, 2.0))
    nb = Subdomain(omega=2.0, diffusion=0.5)
    sub = VentcelSubdomain(mesh, iface, own, nb, TransmissionParams(3.0, 0.2))
    A = sub.matrix(0.01)
    assert A.shape == (sub.size, sub.size)
    assert sp.linalg.norm(A - A.T) < 1e-12 * sp.linalg.norm(A)


def test_system_size():
    mesh = SubdomainMesh(0.0, 0.5, 0.0, 1.0, 3, 4, interface_face=RIGHT)
    iface = InterfaceMesh(0.5, np.linspace(0, 1, 5), mesh.interface_cells, mesh.interface_cells)
    sub = VentcelSubdomain(mesh, iface, Subdomain(), Subdomain(), TransmissionParams(1.0, 0.1))
    nc, ny = 12, 4
    assert sub.size == 4 * nc + nc + mesh.interior_edges.size + ny + 2 * ny + (ny - 1)


def test_zero_data_gives_zero_solution():
    sub, _, _ = build(2, 3)
    traj = sub.solve_window(np.zeros((5, 3)), TimeGrid.uniform(1.0, 5), store="all")
    assert len(traj.states) == 6
    assert not np.any(traj.lam_gamma) and not np.any(traj.final.c)


def test_mass_balance_per_cell():
    sub, _, _ = build(3, 3)
    rng = np.random.default_rng(2)
    prev = sub.initial_state()
    prev.c = rng.normal(size=9)
    dt = 0.05
    source = lambda x, y, t: 1.0 + x
    new = sub.step(dt, prev, rng.normal(size=3), source, 0.1)
    f = sub.source_integrals(source, 0.1)
    lhs = sub.mesh.cell_area * sub.omega * (new.c - prev.c) / dt + new.flux.sum(axis=1)
    assert np.allclose(lhs, f, atol=1e-12)


def test_flux_continuity_and_dirichlet():
    sub, _, _ = build(3, 3)
    new = sub.step(0.1, sub.initial_state(), np.ones(3), None)
    m = sub.mesh
    e = m.interior_edges
    k0, k1 = m.edge_cells[e, 0], m.edge_cells[e, 1]
    vert = e < m.n_vertical
    f0 = new.flux[k0, np.where(vert, RIGHT, 3)]
    f1 = new.flux[k1, np.where(vert, LEFT, 2)]
    assert np.allclose(f0 + f1, 0.0, atol=1e-13)
    assert not np.any(new.lam[m.dirichlet_edges])
    # 1D flux continuity at the inner interface points
    assert np.allclose(new.phi_gamma[:-1, 1] + new.phi_gamma[1:, 0], 0.0, atol=1e-13)


def test_window_is_linear_in_data():
    sub, _, _ = build(2, 3)
    grid = TimeGrid.uniform(0.5, 4)
    rng = np.random.default_rng(7)
    z1, z2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    a = sub.vtv(z1, grid).values
    b = sub.vtv(z2, grid).values
    c = sub.vtv(2.0 * z1 - 3.0 * z2, grid).values
    assert np.allclose(c, 2 * a - 3 * b, atol=1e-12)


def test_factorization_cached_per_step():
    sub, _, _ = build(2, 2)
    assert sub.factorization(0.1) is sub.factorization(0.1)
    assert sub.factorization(0.1) is not sub.factorization(0.2)
    with pytest.raises(ValueError):
        sub.matrix(0.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        TransmissionParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        TransmissionParams(1.0, -0.1)
    with pytest.raises(ValueError):
        TransmissionParams(1.0, 0.5, "robin")
    assert TransmissionParams(2.0, 0.0).alpha_on(3).tolist() == [2.0, 2.0, 2.0]


def test_window_shape_errors():
    sub, _, _ = build(2, 2)
    with pytest.raises(ValueError):
        sub.solve_window(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        sub.solve_window(np.zeros((3, 5)), TimeGrid.uniform(1.0, 3))
