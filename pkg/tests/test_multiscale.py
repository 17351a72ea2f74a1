import numpy as np
import pytest

from lagrelax.decomposition import DecompositionConfig
from lagrelax.gaussian import build_gaussian_relaxation
from lagrelax.generators import generate_chain_membrane, generate_thin_membrane
from lagrelax.models import ModelError
from lagrelax.multiscale import (
    build_multiscale,
    cross_scale_update,
    fine_scale_means,
    multiscale_consistency_residual,
    multiscale_objective,
    solve_multiscale,
    summary_multipliers,
)
from lagrelax.oracle import exact_gaussian_solve


def test_scale_sizes_dyadic():
    gm = generate_chain_membrane(8, 0.05, seed=0)
    ms = build_multiscale(gm, levels=3, block=2)
    assert [s.size for s in ms.scales] == [8, 4, 2]


def test_invalid_geometry():
    gm = generate_chain_membrane(6, 0.05, seed=0)
    with pytest.raises(ModelError):
        build_multiscale(gm, levels=3, block=2)  # 6 -> 3 -> not divisible
    gm2 = generate_thin_membrane(3, 0.05, seed=0)
    with pytest.raises(ModelError):
        build_multiscale(gm2, levels=2, block=2)  # not a chain


def test_initial_equivalence_on_lifted_states():
    gm = generate_chain_membrane(8, 0.05, seed=1)
    ms = build_multiscale(gm, levels=3, block=2)
    rng = np.random.default_rng(0)
    from lagrelax.models import evaluate_objective

    for _ in range(10):
        x = rng.normal(size=8)
        assert multiscale_objective(ms, x) == pytest.approx(
            evaluate_objective(gm, x), abs=1e-10
        )


def test_summary_multiplier_closed_form():
    Lam, lam = summary_multipliers(
        [[1.0, 1.0]], np.eye(2), np.array([1.0, 1.0]), np.array([[0.25]]), np.array([0.0])
    )
    assert Lam[0, 0] == pytest.approx(0.125)
    assert lam[0] == pytest.approx(0.5)


def test_matched_moments_are_a_fixed_point():
    # coarse moments already equal the summarized fine moments
    A = np.array([[0.5, 0.5]])
    J1 = np.array([[2.0, 0.3], [0.3, 1.5]])
    h1 = np.array([0.4, -0.2])
    P1 = np.linalg.inv(J1)
    M = A @ P1 @ A.T
    J2 = np.linalg.inv(M)
    h2 = J2 @ (A @ P1 @ h1)
    Lam, lam = summary_multipliers(A, J1, h1, J2, h2)
    assert np.max(np.abs(Lam)) < 1e-12
    assert np.max(np.abs(lam)) < 1e-12


def test_cross_update_enforces_moment_conditions():
    gm = generate_chain_membrane(4, 0.1, seed=2)
    ms = build_multiscale(gm, levels=2, block=2)
    link = ms.links[0][0]
    cross_scale_update(ms, link)
    fine, coarse = ms.scales[0].matcher, ms.scales[1].matcher
    J1, h1 = fine.marginal(link.fine_comp, link.fine_locs)
    J2, h2 = coarse.marginal(link.coarse_comp, link.coarse_locs)
    P1 = np.linalg.inv(J1)
    P2 = np.linalg.inv(J2)
    A = link.A
    assert np.max(np.abs(P2 @ h2 - A @ (P1 @ h1))) < 1e-9
    assert np.max(np.abs(P2 - A @ P1 @ A.T)) < 1e-9


def test_cross_update_idempotent_at_fixed_point():
    gm = generate_chain_membrane(4, 0.1, seed=3)
    ms = build_multiscale(gm, levels=2, block=2)
    link = ms.links[0][0]
    cross_scale_update(ms, link)
    Jf = ms.scales[0].matcher.components[link.fine_comp].J.copy()
    Jc = ms.scales[1].matcher.components[link.coarse_comp].J.copy()
    resid = cross_scale_update(ms, link)
    assert resid < 1e-12
    assert np.max(np.abs(ms.scales[0].matcher.components[link.fine_comp].J - Jf)) < 1e-12
    assert np.max(np.abs(ms.scales[1].matcher.components[link.coarse_comp].J - Jc)) < 1e-12


def test_global_consistency_preserved_through_solve():
    gm = generate_chain_membrane(16, 0.01, seed=4)
    ms = build_multiscale(gm, levels=3, block=2)
    for _ in range(3):
        for s in range(ms.levels - 1):
            ms.scales[s].matcher.sweep()
            for link in ms.links[s]:
                cross_scale_update(ms, link)
        ms.scales[-1].matcher.sweep()
        for s in reversed(range(ms.levels - 1)):
            for link in ms.links[s]:
                cross_scale_update(ms, link)
            ms.scales[s].matcher.sweep()
        dJ, dh = multiscale_consistency_residual(ms)
        assert dJ < 1e-9 and dh < 1e-9
        for scale in ms.scales:
            assert scale.matcher.factorization_ok()


def test_solve_converges_to_exact_means():
    gm = generate_chain_membrane(32, 0.01, seed=5)
    mean, _, _ = exact_gaussian_solve(gm)
    rep = solve_multiscale(gm, levels=4, block=2, tol=1e-10, max_iters=300)
    assert rep.converged
    assert np.max(np.abs(rep.means - mean)) < 1e-6


def test_levels_one_matches_single_scale():
    gm = generate_chain_membrane(16, 0.05, seed=6)
    ms = build_multiscale(gm, levels=1, block=2)
    assert ms.levels == 1 and not ms.links
    cfg = DecompositionConfig(
        strategy="thin-strips", rows=1, cols=16, strip_width=4, overlap=2
    )
    relax = build_gaussian_relaxation(gm, cfg)
    r_ms = [ms.scales[0].matcher.sweep() for _ in range(5)]
    r_ss = [relax.sweep_moment_matching() for _ in range(5)]
    assert np.allclose(r_ms, r_ss, atol=1e-12)
    mean_ms = fine_scale_means(ms)
    assert np.max(np.abs(mean_ms - relax.node_means())) < 1e-12
