import numpy as np
import pytest

from heatkkt.config import ProblemConfig
from heatkkt.heat import HeatOperators
from heatkkt.partition import build_time_partition
from heatkkt.schur import (
    RASQ,
    CoarseSpaceError,
    DenseRAS,
    DenseSchur,
    TwoLevel,
    apply_rasq,
    apply_two_level,
    build_coarse_space,
    coarse_basis,
    dense_ras_matrix,
    dense_rasq_matrix,
    dense_shat,
    make_schur_solver,
    node_dofs,
    temporal_profiles,
    verify_subdomain_identity,
)

# (nx, ny) mesh intervals giving 1, 4 and 9 interior unknowns
MESH = {1: (2, 2), 4: (3, 3), 9: (4, 4)}


def setup(nt, nd, n_sp, omega=1e-2, sign="minus", policy="earlier"):
    nx, ny = MESH[n_sp]
    ops = HeatOperators(ProblemConfig(nt=nt, nd=nd, nx=nx, ny=ny, omega=omega, jhat_sign=sign))
    return ops, build_time_partition(nt, nd, policy)


def dense_map(apply, ops):
    return np.column_stack([np.ravel(apply(e.reshape(ops.shape))) for e in np.eye(ops.size)])


def test_time_laplacian_fixture():
    dt = 0.1
    lower = np.array([[1.0, 0.0, 0.0], [-1.0 + dt, 1.0, 0.0], [0.0, -1.0 + dt, 1.0]])
    expected = np.array([[1.0, -0.9, 0.0], [-0.9, 1.81, -0.9], [0.0, -0.9, 1.81]])
    assert np.array_equal(lower @ lower.T, expected)
    assert 2 * (1 - dt) + dt**2 == 1.81 and -(1 - dt) == -0.9


def test_rasq_zero():
    ops, part = setup(9, 3, 4)
    np.testing.assert_array_equal(RASQ(ops, part).apply(np.zeros(ops.shape)), 0.0)


@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_rasq_single_subdomain_is_exact_inverse(sign):
    ops, part = setup(6, 1, 9, sign=sign)
    r = np.random.default_rng(0).standard_normal(ops.size)
    ref = np.linalg.solve(dense_shat(ops), r)
    got = RASQ(ops, part).apply(r).ravel()
    assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)


@pytest.mark.parametrize("policy", ["earlier", "later"])
def test_rasq_matches_dense_assembly(policy):
    ops, part = setup(9, 3, 4, policy=policy)
    r = np.random.default_rng(1).standard_normal(ops.shape)
    ref = (dense_rasq_matrix(ops, part) @ r.ravel()).reshape(ops.shape)
    batched = RASQ(ops, part).apply(r)
    looped = apply_rasq(ops, part, r)
    scale = np.abs(ref).max()
    np.testing.assert_allclose(batched, ref, rtol=0, atol=1e-12 * scale)
    np.testing.assert_allclose(looped, ref, rtol=0, atol=1e-12 * scale)


@pytest.mark.parametrize("nt, nd", [(4, 4), (2, 2), (8, 4), (10, 5)])
def test_rasq_batched_matches_per_window_small_subdomains(nt, nd):
    ops, part = setup(nt, nd, 4)
    r = np.random.default_rng(nt).standard_normal(ops.shape)
    np.testing.assert_allclose(RASQ(ops, part).apply(r), apply_rasq(ops, part, r), rtol=1e-13, atol=1e-15)


def test_rasq_linear_and_deterministic():
    ops, part = setup(12, 4, 4)
    rasq = RASQ(ops, part)
    a, b = np.random.default_rng(2).standard_normal((2,) + ops.shape)
    lhs = rasq.apply(2.5 * a - 0.75 * b)
    rhs = 2.5 * rasq.apply(a) - 0.75 * rasq.apply(b)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)
    assert np.array_equal(rasq.apply(a), rasq.apply(a))


def test_dense_ras_single_subdomain():
    ops, part = setup(5, 1, 4)
    r = np.random.default_rng(3).standard_normal(ops.size)
    np.testing.assert_allclose(DenseRAS(ops, part).apply(r).ravel(), np.linalg.solve(dense_shat(ops), r), rtol=1e-10)


def test_ras_and_rasq_leading_subdomain_coincide_later_ones_differ():
    ops, part = setup(9, 3, 4)
    shat = dense_shat(ops)
    jh = ops.sparse_J(hat=True).toarray()
    for s in (1, 2):
        idx = node_dofs(ops, part.nodes(s))
        ras_local = np.linalg.inv(shat[np.ix_(idx, idx)])
        ext = node_dofs(ops, part.extended(s))
        js_inv = np.linalg.inv(jh[np.ix_(ext, ext)])
        rasq_ext = js_inv.T @ js_inv * ops.mass_scale
        off = ext.size - idx.size
        rasq_local = rasq_ext[off:, off:]
        gap = np.abs(ras_local - rasq_local).max() / np.abs(ras_local).max()
        if s == 1:
            assert gap <= 1e-12
        else:
            assert gap > 1e-6
    r = np.random.default_rng(4).standard_normal(ops.size)
    assert np.linalg.norm(dense_ras_matrix(ops, part) @ r - dense_rasq_matrix(ops, part) @ r) > 0


@pytest.mark.parametrize("nt, nd, n_sp", [(9, 3, 1), (9, 3, 4), (12, 4, 4), (12, 4, 9), (6, 6, 4), (8, 2, 9)])
@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_subdomain_identity(nt, nd, n_sp, sign):
    ops, part = setup(nt, nd, n_sp, sign=sign, omega=1e-3)
    scale = np.abs(dense_shat(ops)).max()
    for s in range(1, nd + 1):
        assert verify_subdomain_identity(ops, part, s) <= 1e-12 * scale


def test_subdomain_identity_leading_subdomain_exact():
    ops, part = setup(9, 3, 4)
    assert verify_subdomain_identity(ops, part, 1) <= 1e-15 * np.abs(dense_shat(ops)).max()


def test_linear_profile_spacing():
    np.testing.assert_allclose(temporal_profiles(4)[1], [-1, -1 / 3, 1 / 3, 1], rtol=1e-15)
    assert len(temporal_profiles(1)) == 1


def test_scalar_coarse_single_subdomain():
    ops, part = setup(6, 1, 4)
    cs = build_coarse_space(ops, part, "scalar")
    assert cs.dim == 2
    z = cs.Z.toarray()
    np.testing.assert_array_equal(z[:, 0], 1.0)
    ramp = -1 + 2 * np.arange(6) / 5
    np.testing.assert_allclose(z[:, 1], np.repeat(ramp, 4), rtol=1e-15)
    galerkin = z.T @ dense_shat(ops) @ z
    np.testing.assert_allclose(cs.S0, galerkin, rtol=1e-12)
    np.testing.assert_allclose(cs.S0, cs.S0.T, rtol=1e-14)
    assert np.all(np.linalg.eigvalsh(cs.S0) > 0)


@pytest.mark.parametrize("variant", ["scalar", "per-dof"])
def test_coarse_operator_is_galerkin_product(variant):
    ops, part = setup(8, 2, 4)
    cs = build_coarse_space(ops, part, variant)
    assert cs.dim == (4 if variant == "scalar" else 16)
    z = cs.Z.toarray()
    s0 = cs.S0 if variant == "scalar" else cs.S0.toarray()
    ref = z.T @ dense_shat(ops) @ z
    assert np.abs(s0 - ref).max() <= 1e-11 * np.abs(ref).max()


def test_coarse_columns_supported_on_owned_nodes():
    ops, part = setup(12, 3, 4)
    z, labels = coarse_basis(ops, part, "per-dof")
    z = z.toarray()
    for col, label in enumerate(labels):
        s = label[0]
        support_nodes = set(np.flatnonzero(z[:, col]) // ops.n_sp + 1)
        assert support_nodes <= set(part.owned(s))


def test_single_owned_node_drops_ramp():
    ops, part = setup(4, 4, 1)
    cs = build_coarse_space(ops, part, "scalar")
    # every subdomain owns a single node, where the masked ramp duplicates the constant
    assert cs.dim == 4


def test_rank_deficient_coarse_raises(monkeypatch):
    ops, part = setup(6, 2, 4)
    import heatkkt.schur as schur

    monkeypatch.setattr(schur, "temporal_profiles", lambda n: [np.ones(n), np.ones(n)])
    with pytest.raises(CoarseSpaceError, match="scalar"):
        build_coarse_space(ops, part, "scalar")


@pytest.mark.parametrize("form", ["literal", "multiplicative", "additive"])
def test_two_level_zero(form):
    ops, part = setup(8, 2, 4)
    cs = build_coarse_space(ops, part, "scalar")
    np.testing.assert_array_equal(apply_two_level(ops, part, cs, np.zeros(ops.shape), form), 0.0)


@pytest.mark.parametrize("variant", ["scalar", "per-dof"])
def test_coarse_step_solves_galerkin_range(variant):
    ops, part = setup(12, 3, 4)
    cs = build_coarse_space(ops, part, variant)
    c = np.random.default_rng(5).standard_normal(cs.dim)
    r = ops.apply_Shat(ops.field(cs.Z @ c))
    y = apply_two_level(ops, part, cs, r, "multiplicative", "coarse-first")
    shat = dense_shat(ops)
    assert np.linalg.norm(shat @ y.ravel() - r.ravel()) <= 1e-10 * np.linalg.norm(r)


def test_literal_form_rank_bounded_by_coarse_dimension():
    ops, part = setup(12, 3, 4)
    cs = build_coarse_space(ops, part, "scalar")
    m = dense_map(lambda r: apply_two_level(ops, part, cs, r, "literal"), ops)
    assert np.linalg.matrix_rank(m) <= cs.dim < ops.size


@pytest.mark.parametrize("order", ["coarse-first", "fine-first"])
def test_multiplicative_single_subdomain_full_rank(order):
    ops, part = setup(6, 1, 4)
    cs = build_coarse_space(ops, part, "scalar")
    m = dense_map(lambda r: apply_two_level(ops, part, cs, r, "multiplicative", order), ops)
    assert np.linalg.matrix_rank(m) == ops.size


def test_additive_is_sum():
    ops, part = setup(8, 2, 4)
    cs = build_coarse_space(ops, part, "per-dof")
    r = np.random.default_rng(6).standard_normal(ops.shape)
    ref = RASQ(ops, part).apply(r) + ops.field(cs.solve(r))
    np.testing.assert_allclose(apply_two_level(ops, part, cs, r, "additive"), ref, rtol=1e-14)


def test_two_level_deterministic():
    ops, part = setup(12, 3, 4)
    tl = TwoLevel(ops, part)
    r = np.random.default_rng(7).standard_normal(ops.shape)
    assert np.array_equal(tl.apply(r), tl.apply(r))


def test_factory():
    ops, part = setup(8, 2, 4)
    for kind, cls in [("one-level", RASQ), ("two-level", TwoLevel), ("dense-schur", DenseSchur), ("true-schur", DenseSchur)]:
        assert isinstance(make_schur_solver(ops, part, ops.config.replace(precond_kind=kind)), cls)
    assert make_schur_solver(ops, part, ops.config.replace(precond_kind="none")) is None
