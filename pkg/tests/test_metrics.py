import numpy as np
import pytest

from fgred.factor_graph import LinearFactor, SupplementedGraph
from fgred.gauss import GaussianBelief
from fgred.lattice import validate_antichain
from fgred.metrics import (
    QualityKind,
    quality,
    quality_info,
    redundancy_mc,
    redundancy_mc_info,
    redundancy_quadrature_1d,
    redundancy_quadrature_1d_info,
    redundancy_report,
    specific_info_wb,
    specific_wer,
    wass_coefficients,
    wass_coefficients_info,
    wb_coefficients,
    wb_coefficients_info,
)


def random_spd(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return A @ A.T + scale * np.eye(n)


def random_system(rng, n=3, m=4):
    """(prior belief, delta, A, gamma) for one source."""
    info_b = random_spd(rng, n)
    mu_b = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    gamma = random_spd(rng, m)
    return GaussianBelief(mean=mu_b, info=info_b), A.T @ gamma @ A, A, gamma


def two_source_graph(rng, n_vars=1, var_dim=2):
    state = n_vars * var_dim
    anchor = LinearFactor(
        A=np.eye(state), z=rng.standard_normal(state),
        gamma=random_spd(rng, state), args=tuple(range(n_vars)),
    )
    factors = [anchor]
    for _ in range(2):
        rows = int(rng.integers(1, 4))
        A = rng.standard_normal((rows, state))
        factors.append(LinearFactor(A=A, z=rng.standard_normal(rows),
                                    gamma=random_spd(rng, rows), args=tuple(range(n_vars))))
    return SupplementedGraph(factors=factors, base=(0,), n_vars=n_vars, var_dim=var_dim)


def gauss_kl(mu0, cov0, mu1, cov1):
    """KL(N0 || N1), textbook closed form."""
    k = len(mu0)
    inv1 = np.linalg.inv(cov1)
    d = mu1 - mu0
    return 0.5 * (
        np.trace(inv1 @ cov0) + d @ inv1 @ d - k
        + np.linalg.slogdet(cov1)[1] - np.linalg.slogdet(cov0)[1]
    )


def test_quality_kind_parse():
    assert QualityKind.parse("wb") is QualityKind.WB
    assert QualityKind.parse("WASS") is QualityKind.WASS
    assert QualityKind.parse(QualityKind.WB) is QualityKind.WB
    with pytest.raises(ValueError):
        QualityKind.parse("nope")


def test_specific_info_matches_kl_oracle():
    # the information-theoretic specific quality equals the KL divergence
    # between the measurement distribution given x and its marginal
    rng = np.random.default_rng(0)
    for _ in range(10):
        belief, delta, A, gamma = random_system(rng)
        co = wb_coefficients_info(belief.info, delta)
        cov_b = belief.cov()
        cov_z_given_x = np.linalg.inv(gamma)
        cov_z = cov_z_given_x + A @ cov_b @ A.T
        for _ in range(3):
            x = belief.mean + rng.standard_normal(belief.dim)
            want = gauss_kl(A @ x, cov_z_given_x, A @ belief.mean, cov_z)
            got = specific_info_wb(co, belief.mean, x)
            assert got == pytest.approx(want, abs=1e-8)


def test_specific_wer_matches_nested_mc():
    # error-reduction form: prior Wasserstein error minus expected posterior
    # Wasserstein error, the expectation estimated by brute-force z sampling
    rng = np.random.default_rng(1)
    belief, delta, A, gamma = random_system(rng)
    co = wass_coefficients_info(belief.info, delta)
    x = belief.mean + rng.standard_normal(belief.dim)

    cov_b = belief.cov()
    lam_t = belief.info + delta
    cov_t = np.linalg.inv(lam_t)
    n_draws = 200_000
    zrng = np.random.default_rng(42)
    Z = A @ x + zrng.multivariate_normal(np.zeros(A.shape[0]), np.linalg.inv(gamma), n_draws)
    rhs = (belief.info @ belief.mean)[None, :] + Z @ (A.T @ gamma).T
    mu_post = np.linalg.solve(lam_t, rhs.T).T
    prior_err = np.trace(cov_b) + (belief.mean - x) @ (belief.mean - x)
    post_err = np.trace(cov_t) + ((mu_post - x) ** 2).sum(axis=1)
    vals = prior_err - post_err
    got = specific_wer(co, belief.mean, x)
    se = vals.std() / np.sqrt(n_draws)
    assert abs(vals.mean() - got) < 4 * se


def test_expected_specific_equals_quality():
    # averaging each specific quality over the prior recovers the quality
    rng = np.random.default_rng(2)
    for _ in range(6):
        belief, delta, _, _ = random_system(rng)
        xrng = np.random.default_rng(7)
        X = belief.sample(xrng, 40_000)
        co_wb = wb_coefficients_info(belief.info, delta)
        co_wa = wass_coefficients_info(belief.info, delta)
        for co, fn, kind in (
            (co_wb, specific_info_wb, QualityKind.WB),
            (co_wa, specific_wer, QualityKind.WASS),
        ):
            vals = np.array([fn(co, belief.mean, x) for x in X[:20_000]])
            q = quality_info(belief.info, delta, kind)
            se = vals.std() / np.sqrt(len(vals))
            assert abs(vals.mean() - q) < 4 * se


def test_wb_quality_is_mutual_information():
    rng = np.random.default_rng(3)
    g = two_source_graph(rng)
    for J in ((1,), (2,), (1, 2)):
        assert quality(g, J, QualityKind.WB) == pytest.approx(g.mutual_information(J), abs=1e-12)


def test_wass_quality_trace_form():
    rng = np.random.default_rng(4)
    belief, delta, _, _ = random_system(rng)
    lam_t = belief.info + delta
    want = 2.0 * np.trace(np.linalg.inv(belief.info) - np.linalg.inv(lam_t))
    assert quality_info(belief.info, delta, QualityKind.WASS) == pytest.approx(want, abs=1e-10)


def test_quality_monotone_in_source_set():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = two_source_graph(rng)
        for kind in QualityKind:
            q1 = quality(g, (1,), kind)
            q12 = quality(g, (1, 2), kind)
            assert q1 <= q12 + 1e-10
            assert quality(g, (), kind) == pytest.approx(0.0, abs=1e-12)


def test_coefficient_matrices_psd():
    rng = np.random.default_rng(6)
    for _ in range(20):
        belief, delta, _, _ = random_system(rng, n=int(rng.integers(1, 6)))
        co_wb = wb_coefficients_info(belief.info, delta)
        assert np.linalg.eigvalsh(co_wb.M).min() >= -1e-8
        co_wa = wass_coefficients_info(belief.info, delta)
        assert np.linalg.eigvalsh(co_wa.N_prime).min() >= -1e-8
        # N may be indefinite; the recorded minimum eigenvalue is the witness
        assert co_wa.n_min_eig == pytest.approx(np.linalg.eigvalsh(co_wa.N).min(), abs=1e-9)


def test_specific_wb_minimized_at_prior_mean():
    rng = np.random.default_rng(7)
    belief, delta, _, _ = random_system(rng)
    co = wb_coefficients_info(belief.info, delta)
    at_mean = specific_info_wb(co, belief.mean, belief.mean)
    for _ in range(20):
        x = belief.mean + rng.standard_normal(belief.dim)
        assert specific_info_wb(co, belief.mean, x) >= at_mean - 1e-12


def test_self_redundancy_quadrature_matches_quality_1d():
    rng = np.random.default_rng(8)
    for _ in range(8):
        g = two_source_graph(rng, n_vars=1, var_dim=1)
        for kind in QualityKind:
            for J in ((1,), (2,)):
                alpha = validate_antichain([J])
                r = redundancy_quadrature_1d(g, alpha, kind)
                assert r == pytest.approx(quality(g, J, kind), abs=1e-6)


def test_mc_matches_quadrature_1d():
    rng = np.random.default_rng(9)
    for trial in range(6):
        g = two_source_graph(rng, n_vars=1, var_dim=1)
        alpha = validate_antichain([(1,), (2,)])
        for kind in QualityKind:
            quad = redundancy_quadrature_1d(g, alpha, kind)
            mc = redundancy_mc(g, alpha, kind, n_samples=40_000, rng_seed=trial)
            assert abs(mc.value - quad) < 4 * mc.std_error + 1e-9


def test_redundancy_monotone_with_shared_samples():
    # adding a source to the antichain can only lower the pointwise min,
    # so with identical draws the estimate is deterministically ordered
    rng = np.random.default_rng(10)
    belief, d1, _, _ = random_system(rng)
    _, d2, _, _ = random_system(rng)
    for kind in QualityKind:
        small = redundancy_mc_info(belief, [d1], kind, n_samples=5000, rng_seed=3)
        big = redundancy_mc_info(belief, [d1, d2], kind, n_samples=5000, rng_seed=3)
        assert big.value <= small.value + 1e-12


def test_argmin_counts():
    rng = np.random.default_rng(11)
    belief, d1, _, _ = random_system(rng)
    _, d2, _, _ = random_system(rng)
    est = redundancy_mc_info(belief, [d1, d2], QualityKind.WB, n_samples=2000, rng_seed=0)
    assert sum(est.argmin_counts) == 2000
    # identical sources tie everywhere; ties go to the first
    est2 = redundancy_mc_info(belief, [d1, d1], QualityKind.WB, n_samples=500, rng_seed=0)
    assert est2.argmin_counts == (500, 0)


def test_redundancy_mc_validation():
    rng = np.random.default_rng(12)
    belief, d1, _, _ = random_system(rng)
    with pytest.raises(ValueError):
        redundancy_mc_info(belief, [], QualityKind.WB)
    with pytest.raises(ValueError):
        redundancy_mc_info(belief, [d1], QualityKind.WB, n_samples=1)


def test_redundancy_mc_deterministic():
    rng = np.random.default_rng(13)
    belief, d1, _, _ = random_system(rng)
    _, d2, _, _ = random_system(rng)
    a = redundancy_mc_info(belief, [d1, d2], QualityKind.WASS, n_samples=3000, rng_seed=5)
    b = redundancy_mc_info(belief, [d1, d2], QualityKind.WASS, n_samples=3000, rng_seed=5)
    assert a.value == b.value and a.std_error == b.std_error


def test_quadrature_handles_piece_crossings():
    # sources engineered so the argmin switches inside the integration range
    info = np.array([[1.0]])
    belief = GaussianBelief(mean=np.zeros(1), info=info)
    d1 = np.array([[0.5]])
    d2 = np.array([[3.0]])
    for kind in QualityKind:
        quad = redundancy_quadrature_1d_info(belief, [d1, d2], kind)
        mc = redundancy_mc_info(belief, [d1, d2], kind, n_samples=200_000, rng_seed=0)
        assert abs(mc.value - quad) < 4 * mc.std_error + 1e-9


def test_redundancy_report_record():
    rng = np.random.default_rng(14)
    g = two_source_graph(rng)
    alpha = validate_antichain([(1,), (2,)])
    rec = redundancy_report(g, alpha, QualityKind.WB, n_samples=2000, rng_seed=0)
    assert rec["kind"] == "wb"
    assert rec["antichain"] == [[1], [2]]
    assert rec["n_samples"] == 2000
    assert len(rec["per_source_quality"]) == 2
    assert np.isfinite(rec["value"]) and rec["std_error"] > 0
