import itertools

import numpy as np
import pytest

from steinis import (
    CanonicalSteinKernel,
    ContractViolation,
    Dataset,
    DomainError,
    GraphSpec,
    LatticeSteinKernel,
    LogisticPosterior,
    MarginalSteinKernel,
    PoissonLattice,
    StandardGaussian,
    SubsampledSteinKernel,
    TabulatedLattice,
    ZanellaSteinKernel,
    base_derivatives,
    base_eval,
    gaussian,
    imq,
    inverse_log,
)
from steinis.kernels import balancing_min, balancing_ratio
from oracles import finite_diff_cross_div, finite_diff_grad_x, finite_diff_grad_y

FAMILIES = [imq(1.0, 0.5), imq(0.7, 1.3), gaussian(1.0), gaussian(0.4), inverse_log(1.0)]


# ---------------------------------------------------------------- base kernels

def test_imq_at_zero_distance():
    assert base_eval(imq(1.0, 0.5), np.zeros(3), np.zeros(3)) == 1.0


def test_imq_at_squared_distance_three():
    # direct evaluation: (1 + 3)^{-1/2} = 0.5
    x = np.array([np.sqrt(3.0), 0.0])
    assert base_eval(imq(1.0, 0.5), x, np.zeros(2)) == pytest.approx(0.5, rel=1e-12)


def test_gaussian_at_log_two():
    x = np.array([np.sqrt(np.log(2.0))])
    assert base_eval(gaussian(1.0), x, np.zeros(1)) == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("kern", FAMILIES, ids=lambda k: k.id())
def test_complete_monotonicity_spot_check(kern):
    s = np.linspace(0.0, 50.0, 101)
    assert np.all(kern.kappa(s) >= 0)
    assert np.all(kern.kappa_prime(s) <= 0)
    assert np.all(kern.kappa_double_prime(s) >= 0)


@pytest.mark.parametrize("kern", FAMILIES, ids=lambda k: k.id())
def test_base_derivatives_match_finite_differences(kern):
    rng = np.random.default_rng(5)
    f = lambda u, v: base_eval(kern, u, v)
    for _ in range(20):
        x = rng.standard_normal(3)
        y = rng.standard_normal(3)
        gx, gy, cross = base_derivatives(kern, x, y)
        np.testing.assert_allclose(gx, finite_diff_grad_x(f, x, y), rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(gy, finite_diff_grad_y(f, x, y), rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(cross, finite_diff_cross_div(f, x, y), rtol=1e-6)


def test_derivatives_at_coincident_points():
    d = 20
    kern = imq(1.0, 0.5)
    gx, gy, cross = base_derivatives(kern, np.zeros(d), np.zeros(d))
    np.testing.assert_array_equal(gx, np.zeros(d))
    np.testing.assert_array_equal(gy, np.zeros(d))
    # kappa'(0) = -1/2 so the divergence term is -2 d kappa'(0) = 20;
    # cross-checked against finite differences of base_eval
    assert cross == pytest.approx(20.0, rel=1e-12)
    fd = finite_diff_cross_div(lambda u, v: base_eval(kern, u, v), np.zeros(d), np.zeros(d))
    assert cross == pytest.approx(fd, rel=1e-6)


def test_base_kernel_symmetry():
    rng = np.random.default_rng(9)
    for kern in FAMILIES:
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        assert base_eval(kern, x, y) == pytest.approx(base_eval(kern, y, x), rel=1e-15)


def test_bad_family_rejected():
    from steinis import BaseKernel
    with pytest.raises(ContractViolation):
        BaseKernel("triangle")
    with pytest.raises(ContractViolation):
        BaseKernel("imq", alpha=-1.0)


# ------------------------------------------------------------ canonical kernel

def oracle_canonical(kern, model, x, y):
    """Canonical Stein kernel assembled purely from finite differences."""
    f = lambda u, v: base_eval(kern, u, v)
    sx, sy = model.score(x), model.score(y)
    return (
        finite_diff_cross_div(f, x, y)
        + sx @ finite_diff_grad_y(f, x, y)
        + sy @ finite_diff_grad_x(f, x, y)
        + base_eval(kern, x, y) * (sx @ sy)
    )


def test_canonical_at_origin_d20():
    model = StandardGaussian(20)
    k = CanonicalSteinKernel(imq(1.0, 0.5), model)
    val = k.pair(np.zeros(20), np.zeros(20))
    assert val == pytest.approx(20.0, rel=1e-12)
    assert val == pytest.approx(oracle_canonical(imq(1.0, 0.5), model, np.zeros(20), np.zeros(20)), rel=1e-6)


def test_canonical_matches_finite_difference_oracle():
    model = StandardGaussian(3)
    rng = np.random.default_rng(17)
    for kern in (imq(1.0, 0.5), gaussian(1.0)):
        k = CanonicalSteinKernel(kern, model)
        for _ in range(5):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            assert k.pair(x, y) == pytest.approx(oracle_canonical(kern, model, x, y), rel=1e-6)


def test_canonical_symmetry():
    model = StandardGaussian(5)
    k = CanonicalSteinKernel(imq(1.0, 0.5), model)
    rng = np.random.default_rng(23)
    for _ in range(100):
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        a, b = k.pair(x, y), k.pair(y, x)
        assert abs(a - b) < 1e-12 * max(1.0, abs(a))


# ------------------------------------------------------------- marginal kernel

def oracle_marginal(kern, model, x, y):
    """Coordinate-sum Stein kernel from finite differences of the
    univariate base kernel."""
    sx, sy = model.score(x), model.score(y)
    total = 0.0
    for i in range(len(x)):
        f = lambda u, v: base_eval(kern, u, v)
        xi = np.array([x[i]])
        yi = np.array([y[i]])
        total += (
            finite_diff_cross_div(f, xi, yi)
            + sx[i] * finite_diff_grad_y(f, xi, yi)[0]
            + sy[i] * finite_diff_grad_x(f, xi, yi)[0]
            + base_eval(kern, xi, yi) * sx[i] * sy[i]
        )
    return total


def test_marginal_equals_canonical_in_1d():
    model = StandardGaussian(1)
    rng = np.random.default_rng(3)
    km = MarginalSteinKernel(imq(1.0, 0.5), model)
    kc = CanonicalSteinKernel(imq(1.0, 0.5), model)
    for _ in range(20):
        x, y = rng.standard_normal(1), rng.standard_normal(1)
        assert km.pair(x, y) == pytest.approx(kc.pair(x, y), rel=1e-12)


def test_marginal_symmetry_and_oracle():
    model = StandardGaussian(4)
    km = MarginalSteinKernel(gaussian(1.0), model)
    rng = np.random.default_rng(31)
    for _ in range(10):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        a = km.pair(x, y)
        assert abs(a - km.pair(y, x)) < 1e-12 * max(1.0, abs(a))
        assert a == pytest.approx(oracle_marginal(gaussian(1.0), model, x, y), rel=1e-6)


def test_marginal_gram_matches_pairs():
    model = StandardGaussian(3)
    km = MarginalSteinKernel(imq(1.0, 0.5), model)
    rng = np.random.default_rng(8)
    pts = rng.standard_normal((6, 3))
    G = km.gram(pts)
    for i in range(6):
        for j in range(6):
            assert G[i, j] == pytest.approx(km.pair(pts[i], pts[j]), rel=1e-10)


# ------------------------------------------------------------- lattice kernel

def test_lattice_symmetry_poisson():
    t = PoissonLattice(2.0)
    k = LatticeSteinKernel(imq(1.0, 0.5), t)
    pts = [np.array([i]) for i in range(11)]
    for a, b in itertools.product(pts, pts):
        assert k.pair(a, b) == pytest.approx(k.pair(b, a), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("form", ["ratio", "pmf"])
def test_lattice_stein_identity_truncated_poisson(form):
    lam, T = 2.0, 40
    t = PoissonLattice(lam)
    k = LatticeSteinKernel(imq(1.0, 0.5), t, form=form)
    xs = np.arange(T + 1)
    pmf = np.exp([t.log_pmf(np.array([x])) for x in xs])
    kmat = np.array([[k.pair(np.array([a]), np.array([b])) for b in xs] for a in xs])
    total = pmf @ kmat @ pmf
    assert abs(total) < 1e-8


def test_lattice_ratio_equals_scaled_mass_form():
    # the ratio form is the mass-form expression under the mass-scaled
    # base kernel k(x,y)/(pi+(x) pi+(y)); verify the algebra numerically
    t = PoissonLattice(1.5)
    base = imq(1.0, 0.5)
    k = LatticeSteinKernel(base, t, form="ratio")

    def mass(p):
        return float(np.exp(t.log_pmf(p))) if t.in_support(p) else 0.0

    def scaled_mass_form(x, y):
        e = np.array([1])

        def kt(u, v):
            mu, mv = mass(u), mass(v)
            return base_eval(base, u.astype(float), v.astype(float)) / (
                (mu if mu > 0 else 1.0) * (mv if mv > 0 else 1.0))

        return (mass(x + e) * mass(y + e) * kt(x + e, y + e)
                - mass(x - e) * mass(y + e) * kt(x, y + e)
                - mass(x + e) * mass(y - e) * kt(x + e, y)
                + mass(x - e) * mass(y - e) * kt(x, y))

    for a in range(6):
        for b in range(6):
            x, y = np.array([a]), np.array([b])
            assert k.pair(x, y) == pytest.approx(scaled_mass_form(x, y), rel=1e-10, abs=1e-12)


def test_lattice_single_point_support():
    t = TabulatedLattice(np.array([1.0]), origin=np.array([5]))
    base = imq(1.0, 0.5)
    k = LatticeSteinKernel(base, t)
    x0 = np.array([5])
    # all neighbour indicators vanish and r(x0) = 0, so only the
    # r(x)r(y)k(x,y) term could survive; here it is 0^2 * k = 0
    r = t.ratio(x0, 0)
    expected = r * r * base_eval(base, x0.astype(float), x0.astype(float))
    assert k.pair(x0, x0) == expected == 0.0


def test_lattice_outside_support_raises():
    t = PoissonLattice(2.0)
    k = LatticeSteinKernel(imq(1.0, 0.5), t)
    with pytest.raises(DomainError):
        k.pair(np.array([-1]), np.array([0]))


def test_lattice_2d_symmetry():
    t = PoissonLattice(1.0, dim=2)
    k = LatticeSteinKernel(gaussian(0.5), t)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.integers(0, 6, size=2)
        y = rng.integers(0, 6, size=2)
        assert k.pair(x, y) == pytest.approx(k.pair(y, x), rel=1e-12, abs=1e-15)


# ------------------------------------------------------------- zanella kernel

def cycle_graph(n, weights=None, balancing="ratio", seed=0):
    rng = np.random.default_rng(seed)
    w = np.ones(n) if weights is None else weights
    nbrs = [[(i - 1) % n, (i + 1) % n] for i in range(n)]
    B = rng.standard_normal((n, n + 2))
    kmat = B @ B.T + 0.5 * np.eye(n)
    return GraphSpec(weights=w, neighbors=nbrs, balancing=balancing, kernel_matrix=kmat)


def test_balancing_functions_property():
    rng = np.random.default_rng(12)
    for g in (balancing_min, balancing_ratio):
        for _ in range(50):
            t = float(rng.uniform(0.01, 20.0))
            assert g(t) == pytest.approx(t * g(1.0 / t), rel=1e-12)


def test_zanella_symmetry_on_cycle():
    g = cycle_graph(5, weights=np.array([1.0, 2.0, 0.5, 1.5, 3.0]))
    k = ZanellaSteinKernel(g)
    for x in range(5):
        for y in range(5):
            assert k.pair(x, y) == pytest.approx(k.pair(y, x), rel=1e-12, abs=1e-15)


def test_zanella_uniform_complete_graph_constant_kernel():
    n = 4
    nbrs = [[j for j in range(n) if j != i] for i in range(n)]
    g = GraphSpec(weights=np.ones(n), neighbors=nbrs, balancing="min",
                  kernel_matrix=np.full((n, n), 2.5))
    k = ZanellaSteinKernel(g)
    for x in range(n):
        for y in range(n):
            assert k.pair(x, y) == 0.0


@pytest.mark.parametrize("balancing", ["min", "ratio"])
def test_zanella_stein_identity_random_graph(balancing):
    rng = np.random.default_rng(77)
    n = 6
    # random connected undirected graph: start from a ring, add chords
    nbrs = {i: {(i - 1) % n, (i + 1) % n} for i in range(n)}
    for _ in range(3):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            nbrs[a].add(int(b))
            nbrs[b].add(int(a))
    neighbors = [sorted(nbrs[i]) for i in range(n)]
    weights = rng.uniform(0.2, 3.0, size=n)
    B = rng.standard_normal((n, n))
    g = GraphSpec(weights=weights, neighbors=neighbors, balancing=balancing,
                  kernel_matrix=B @ B.T + np.eye(n))
    k = ZanellaSteinKernel(g)
    pi = weights / weights.sum()
    total = sum(pi[x] * pi[y] * k.pair(x, y) for x in range(n) for y in range(n))
    assert abs(total) < 1e-10


def test_zanella_disconnected_graph_rejected():
    with pytest.raises(ContractViolation):
        GraphSpec(weights=np.ones(4), neighbors=[[1], [0], [3], [2]],
                  kernel_matrix=np.eye(4))


def test_zanella_vertex_out_of_range():
    g = cycle_graph(5)
    k = ZanellaSteinKernel(g)
    with pytest.raises(DomainError):
        k.pair(0, 9)


# ---------------------------------------------------------- subsampled kernel

def logistic_fixture(n_data=4, d=2, seed=41):
    rng = np.random.default_rng(seed)
    ds = Dataset(features=rng.standard_normal((n_data, d)),
                 labels=rng.integers(0, 2, size=n_data).astype(float))
    return LogisticPosterior(ds, prior_precision=1.0)


def test_subsampled_full_data_equals_canonical():
    model = logistic_fixture()
    base = imq(1.0, 0.5)
    full = [np.arange(model.n_data)] * 6
    ks = SubsampledSteinKernel(base, model, n_k=model.n_data, subsamples=full)
    kc = CanonicalSteinKernel(base, model)
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((6, 2))
    np.testing.assert_allclose(ks.gram(pts), kc.gram(pts), rtol=1e-12)


def test_subsampled_unbiased_for_distinct_indices():
    # enumerate all pairs of size-1 subsamples of a 4-point dataset
    model = logistic_fixture(n_data=4)
    base = imq(1.0, 0.5)
    kc = CanonicalSteinKernel(base, model)
    rng = np.random.default_rng(13)
    for _ in range(10):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        vals = []
        for a in range(4):
            for b in range(4):
                ks = SubsampledSteinKernel(base, model, n_k=1, subsamples=[[a], [b]])
                vals.append(ks.pair_indexed(0, 1, x, y))
        np.testing.assert_allclose(np.mean(vals), kc.pair(x, y), rtol=1e-12)


def test_subsampled_joint_swap_symmetry():
    model = logistic_fixture()
    ks = SubsampledSteinKernel(imq(1.0, 0.5), model, n_k=2, seed=3)
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    assert ks.pair_indexed(0, 1, x, y) == pytest.approx(ks.pair_indexed(1, 0, y, x), rel=1e-12)


def test_subsampled_exchangeability_under_joint_permutation():
    model = logistic_fixture(n_data=6)
    base = imq(1.0, 0.5)
    rng = np.random.default_rng(10)
    pts = rng.standard_normal((5, 2))
    k1 = SubsampledSteinKernel(base, model, n_k=2, seed=9)
    G1 = k1.gram(pts)
    perm = np.array([3, 0, 4, 1, 2])
    # permute samples together with their memoized subsample streams
    subs = [k1.subsample_for(int(p)) for p in perm]
    k2 = SubsampledSteinKernel(base, model, n_k=2, subsamples=subs)
    G2 = k2.gram(pts[perm])
    np.testing.assert_array_equal(G2, G1[np.ix_(perm, perm)])


def test_subsampled_gram_is_psd():
    model = logistic_fixture(n_data=12, d=3, seed=2)
    ks = SubsampledSteinKernel(imq(1.0, 0.5), model, n_k=3, seed=21)
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((30, 3))
    G = ks.gram(pts)
    G = np.triu(G) + np.triu(G, 1).T
    eig = np.linalg.eigvalsh(G)
    assert eig[0] >= -1e-8 * np.trace(G)


def test_subsampled_memoization_is_stable():
    model = logistic_fixture()
    ks = SubsampledSteinKernel(imq(1.0, 0.5), model, n_k=3, seed=5)
    s1 = ks.subsample_for(2).copy()
    s2 = ks.subsample_for(2)
    np.testing.assert_array_equal(s1, s2)
    # a fresh kernel with the same seed draws the same subsamples
    ks2 = SubsampledSteinKernel(imq(1.0, 0.5), model, n_k=3, seed=5)
    np.testing.assert_array_equal(ks2.subsample_for(2), s1)
