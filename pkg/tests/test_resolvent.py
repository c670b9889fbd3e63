import numpy as np
import pytest

from cylspec.operator_model import stability_constants
from cylspec.resolvent import (
    NearPoleError,
    apply_resolvent,
    find_poles,
    resolvent_matrix_for,
    singular_value_decay,
    solve_resolvent,
    spectral_projection,
    triple_norm_bound_check,
    verify_resolvent_identities,
)
from cylspec.spectral import assemble_operator, build_basis, multiplier_matrix


# -- direct solves --------------------------------------------------------------


def test_solve_constant_forcing(ex1, basis_q4m32):
    asm = assemble_operator(ex1, basis_q4m32, 1.0)
    one = np.ones((9, 33, 1), dtype=complex)
    u = solve_resolvent(asm, one)
    assert np.abs(u - 1.0).max() < 1e-11


def test_solve_coordinate_forcing(ex1, basis_q4m32):
    asm = assemble_operator(ex1, basis_q4m32, 1.0)
    f = (basis_q4m32.x1[None, :, None] * np.ones((9, 1, 1))).astype(complex)
    u = solve_resolvent(asm, f)
    assert np.abs(u - f / 1.5).max() < 1e-10


def test_solve_at_pole_raises(ex1, basis_q4m32):
    asm = assemble_operator(ex1, basis_q4m32, 0.0)
    one = np.ones((9, 33, 1), dtype=complex)
    with pytest.raises(NearPoleError) as err:
        solve_resolvent(asm, one)
    assert abs(err.value.nearest) < 1e-6


def test_apply_resolvent_matches_dense(ex1, basis_q4m32):
    rng = np.random.default_rng(0)
    f = rng.standard_normal((9, 33, 1)) + 1j * rng.standard_normal((9, 33, 1))
    z = 1.2 + 0.4j
    direct = solve_resolvent(assemble_operator(ex1, basis_q4m32, z), f)
    fast = apply_resolvent(ex1, basis_q4m32, z, f)
    assert np.abs(direct - fast).max() < 1e-10 * np.abs(direct).max()


# -- pole location ----------------------------------------------------------------


def test_micro_instance_poles(ex1, basis_q0m2):
    ps = find_poles(ex1, basis_q0m2, window=(-1.2, 1.0))
    got = np.sort([p.lam.real for p in ps.poles])
    assert np.abs(got - np.array([-1.0, -0.5, 0.0])).max() < 1e-12
    assert all(abs(p.lam.imag) < 1e-12 for p in ps.poles)


def test_ex1_strip_poles(poles_ex1):
    got = np.sort([p.lam.real for p in poles_ex1.poles])[::-1]
    assert np.abs(got - np.array([0.0, -0.5, -1.0, -1.5, -2.0])).max() < 1e-6
    assert all(p.order == 1 and p.rank == 1 for p in poles_ex1.poles)
    assert abs(poles_ex1.z_star_star) < 1e-9
    assert abs(poles_ex1.z_star_star_star + 0.5) < 1e-9
    assert len(poles_ex1.nonneg) == 1


def test_ex1s_strip_poles(poles_ex1s):
    nonneg = sorted(p.lam.real for p in poles_ex1s.nonneg)
    assert np.abs(np.array(nonneg) - np.array([0.25, 0.75])).max() < 1e-9
    assert abs(poles_ex1s.z_star_star - 0.75) < 1e-9
    assert abs(poles_ex1s.z_star_star_star + 0.25) < 1e-9


def test_pole_lattice_before_reduction(poles_ex1, basis_q4m32):
    # every filtered eigenvalue strictly inside the band has its +i translate
    raw = np.array(poles_ex1.raw_eigenvalues)
    interior = raw[np.abs(raw.imag) <= basis_q4m32.Q_max - 2]
    for z in interior:
        assert np.abs(raw - (z + 1j)).min() < 1e-6


def test_no_eigenvalues_off_the_half_lattice(poles_ex1):
    lattice = np.array([
        -1j * q - 0.5 * p for q in range(-5, 6) for p in range(0, 8)
    ])
    for z in poles_ex1.raw_eigenvalues:
        assert np.abs(lattice - z).min() < 1e-4


def test_window_rank_accounting(poles_ex1):
    # summed projection ranks match the strip eigenvalue count in the window
    raw = np.array(poles_ex1.raw_eigenvalues)
    in_strip = raw[(raw.imag >= -1e-9) & (raw.imag < 1.0 - 1e-9)]
    in_window = in_strip[(in_strip.real >= -2.2) & (in_strip.real <= 1.0)]
    assert sum(p.rank for p in poles_ex1.poles) == len(in_window)


# -- projections -------------------------------------------------------------------
#
# The algebra comparisons run at M=24: resolvent samples on loops deep in the
# left half plane lose digits as M grows (non-normal conditioning), while the
# windowed poles only need degree <= 4.


@pytest.fixture(scope="module")
def algebra_setup(ex1):
    basis = build_basis(4, 24)
    return basis, find_poles(ex1, basis, window=(-2.2, 1.0))


def test_projection_rank_and_image(ex1, basis_q4m32, poles_ex1):
    proj = spectral_projection(ex1, basis_q4m32, 0.0, 0, pole_set=poles_ex1)
    pa = proj.matrix @ multiplier_matrix(ex1, basis_q4m32)
    u, s, _ = np.linalg.svd(pa)
    assert s[1] < 1e-8 * s[0]
    lead = u[:, 0]
    assert np.abs(lead - lead.mean()).max() < 1e-8  # constants span the image


def test_projection_vanishes_at_order(ex1, basis_q4m32, poles_ex1):
    p0 = spectral_projection(ex1, basis_q4m32, 0.0, 0, pole_set=poles_ex1)
    p1 = spectral_projection(ex1, basis_q4m32, 0.0, 1, pole_set=poles_ex1)
    assert np.linalg.norm(p1.matrix) < 1e-9 * np.linalg.norm(p0.matrix)


def test_projection_idempotency(ex1, algebra_setup):
    basis, ps = algebra_setup
    for pole in ps.poles:
        proj = spectral_projection(ex1, basis, pole.source, 0,
                                   pole_set=ps, n_nodes=64)
        pa = proj.matrix @ multiplier_matrix(ex1, basis)
        assert np.linalg.norm(pa @ pa - pa) < 1e-8 * max(np.linalg.norm(pa), 1.0)


def test_projection_algebra(ex1, algebra_setup):
    # P_k A0 P_l = P_{k+l} for k + l <= 3 at every strip pole
    basis, ps = algebra_setup
    a0 = multiplier_matrix(ex1, basis)
    for pole in ps.poles:
        projs = [
            spectral_projection(ex1, basis, pole.source, ell,
                                pole_set=ps, n_nodes=64).matrix
            for ell in range(4)
        ]
        scale = np.linalg.norm(projs[0])
        for k in range(3):
            for ell in range(3 - k + 1):
                lhs = projs[k] @ a0 @ projs[ell]
                assert np.linalg.norm(lhs - projs[k + ell]) < 1e-8 * scale


def test_projection_node_doubling(ex1, basis_q4m32, poles_ex1):
    p32 = spectral_projection(ex1, basis_q4m32, 0.0, 0, pole_set=poles_ex1, n_nodes=32)
    p64 = spectral_projection(ex1, basis_q4m32, 0.0, 0, pole_set=poles_ex1, n_nodes=64)
    assert np.abs(p32.matrix - p64.matrix).max() < 1e-9


def test_contour_separation_guard(ex1, basis_q4m32, poles_ex1):
    from cylspec.operator_model import SpecError

    with pytest.raises(SpecError, match="too close"):
        spectral_projection(ex1, basis_q4m32, 0.0, 0, pole_set=poles_ex1, radius=0.45)


# -- identities and bounds -----------------------------------------------------------


def test_first_resolvent_identity_and_conjugation(ex1, basis_q4m32):
    rep = verify_resolvent_identities(ex1, basis_q4m32, 1.0, 2.0)
    assert rep["resolvent_identity_error"] < 1e-10
    assert rep["conjugation_error"] < 1e-10
    rep = verify_resolvent_identities(ex1, basis_q4m32, 1.0, 1.0 + 1j)
    assert rep["resolvent_identity_error"] < 1e-10
    assert rep["conjugation_error"] < 1e-10


def test_identity_at_equal_points(ex1, basis_q4m32):
    rw = resolvent_matrix_for(ex1, basis_q4m32, 1.4)
    a0 = multiplier_matrix(ex1, basis_q4m32)
    lhs = rw - rw + 0.0 * (rw @ a0 @ rw)
    assert np.linalg.norm(lhs) == 0.0


def test_singular_value_compactness_proxy(ex1):
    basis = build_basis(4, 64)
    sc = stability_constants(ex1)
    report = singular_value_decay(ex1, basis, sc.z_star + 0.1)
    sv = report["singular_values"]
    assert np.all(np.diff(sv) <= 1e-12)          # nonincreasing
    assert sv[-1] < 1e-3 * sv[0]                 # decays within the basis
    tails = report["tail_leading"]
    assert np.all(np.diff(tails) <= 1e-9 * tails[0])


def test_triple_norm_bound_on_random_data(ex1, basis_q4m32):
    report = triple_norm_bound_check(ex1, basis_q4m32, samples=100, seed=0)
    assert report["passed"]
    assert report["worst_ratio"] <= 1.0


def test_triple_norm_bound_trivial_cases(ex1, basis_q4m32):
    from cylspec.norms import triple_norm

    sc = stability_constants(ex1)
    z = sc.z_star + 0.1
    one = np.ones((9, 33, 1), dtype=complex)
    asm = assemble_operator(ex1, basis_q4m32, z)
    du = (asm.matrix @ one.reshape(-1)).reshape(one.shape)
    lhs = triple_norm(one, 0, ex1, basis_q4m32).value
    rhs = triple_norm(du, 1, ex1, basis_q4m32).value
    const = 2.0 * (6.0 + 1.0 / sc.R + 2.0 * ex1.weights.r(1))
    assert lhs <= const * rhs      # ratio well below one for the constant
    assert lhs / (const * rhs) < 0.2


def test_bound_check_rejects_oversized_weights(ex1, basis_q4m32):
    import dataclasses

    from cylspec.operator_model import SpecError, WeightSequence

    fat = dataclasses.replace(ex1, weights=WeightSequence.geometric(0.5, 16))
    with pytest.raises(SpecError, match="smallness"):
        triple_norm_bound_check(fat, basis_q4m32, samples=1)
