import numpy as np
import pytest

from etacurv import cones, geometry
from etacurv.cones import NotAdmissible
from etacurv.geometry import PointState


def random_admissible_state(rng, n, p_scale=1.5):
    """Build (p, r) whose curvature matrix has a prescribed Gamma spectrum."""
    kappa = cones.sample_gamma(rng, 1, n)[0]
    Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    A = Q @ np.diag(kappa) @ Q.T
    p = rng.normal(size=n)
    p *= rng.uniform(0, p_scale) / max(1e-12, np.linalg.norm(p))
    w, gu, gd = geometry.gamma_factors(p)
    r = w * gd @ A @ gd
    return PointState(p=p, r=0.5 * (r + r.T))


def test_point_state_symmetry_check():
    r = np.array([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError):
        PointState(p=np.zeros(2), r=r)
    with pytest.raises(ValueError):
        PointState(p=np.zeros(2), r=np.eye(3))


def test_flat_state():
    g = geometry.geometry_at(PointState(p=np.zeros(2), r=np.zeros((2, 2))))
    assert g.w == 1.0
    assert np.array_equal(g.nu, [0.0, 0.0, 1.0])
    assert np.array_equal(g.A, np.zeros((2, 2)))
    assert g.K_eta == 0.0
    assert g.margin == 0.0
    assert not g.admissible  # boundary of the cone, not strictly inside
    assert g.F is None and g.G2 is None


def test_identity_hessian_zero_gradient():
    n = 3
    g = geometry.geometry_at(PointState(p=np.zeros(n), r=np.eye(n)))
    assert np.allclose(g.kappa, 1.0, atol=1e-15)
    assert g.K_eta == pytest.approx((n - 1) ** n, rel=1e-14)
    assert g.admissible
    # umbilic point: every P_m = (n-1)^(n-1), so f_i = (n-1) P_m = (n-1)^n
    assert np.allclose(g.G2, (n - 1) ** n * np.eye(n), atol=1e-12)
    # gradient coefficients vanish by symmetry at p = 0
    assert np.allclose(g.Gs, 0.0, atol=1e-14)


def test_tilted_state_derived_values():
    # p = (1, 0), r = I: gamma_up = diag(1/sqrt(2), 1), A = diag(1/(2 sqrt 2), 1/sqrt 2)
    g = geometry.geometry_at(PointState(p=np.array([1.0, 0.0]), r=np.eye(2)))
    assert g.w == pytest.approx(np.sqrt(2), rel=1e-15)
    assert g.gamma_up[0, 0] == pytest.approx(1 / np.sqrt(2), rel=1e-14)
    assert g.gamma_up[0, 1] == 0.0
    assert np.allclose(np.sort(g.kappa), [1 / (2 * np.sqrt(2)), 1 / np.sqrt(2)], rtol=1e-14)
    assert g.K_eta == pytest.approx(0.25, rel=1e-13)
    # n = 2 closed form: K_eta = det(r)/w^4, so dK/dp = -4 p det(r)/w^6
    assert np.allclose(g.Gs, [-0.5, 0.0], atol=1e-13)


def test_sphere_cap_curvatures():
    rng = np.random.default_rng(4)
    for n in (2, 3):
        for _ in range(25):
            R = rng.uniform(0.4, 3.0)
            x = rng.normal(size=n)
            x *= rng.uniform(0.0, 0.9) * R / np.linalg.norm(x)
            g = geometry.geometry_at(geometry.cap_state(x, R))
            assert np.abs(g.kappa - 1.0 / R).max() < 1e-12
            assert g.K_eta == pytest.approx(((n - 1) / R) ** n, rel=1e-11)


def test_spectral_grad_diag_and_fd():
    # A = I: every kappa = 1, F = (n-1)^(n-1) * n/(n-1)... for f = prod lambda:
    # f_i = sum_m P_m - P_i with all lambda = n-1
    n = 3
    st = PointState(p=np.zeros(n), r=np.eye(n))
    g = geometry.geometry_at(st)
    assert np.allclose(g.F, 8.0 * np.eye(3), atol=1e-12)  # lambda = 2,2,2: f_i = 2*4

    rng = np.random.default_rng(14)
    for n in (2, 3, 4):
        st = random_admissible_state(rng, n)
        g = geometry.geometry_at(st)
        t = 1e-6
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                # F is the matrix gradient of kappa -> f at A, so a symmetric
                # two-entry bump moves f by 2 F_ij (or F_ii on the diagonal)
                fd = (cones.f_value(np.linalg.eigvalsh(g.A + t * E), strict=False)
                      - cones.f_value(np.linalg.eigvalsh(g.A - t * E), strict=False)) / (2 * t)
                want = (2 - (i == j)) * g.F[i, j]
                assert abs(fd - want) <= 1e-6 * max(1.0, abs(want))


def test_hessian_coeffs_fd_and_ellipticity():
    rng = np.random.default_rng(15)
    for n in (2, 3):
        for _ in range(30):
            st = random_admissible_state(rng, n)
            G2 = geometry.G_hessian_coeffs(st)
            assert np.linalg.eigvalsh(G2).min() > 0  # ellipticity
            t = 1e-6
            for i in range(n):
                for j in range(i, n):
                    E = np.zeros((n, n))
                    E[i, j] = E[j, i] = 1.0
                    fd = (geometry.curvature_value(st.p, st.r + t * E)
                          - geometry.curvature_value(st.p, st.r - t * E)) / (2 * t)
                    want = (2 - (i == j)) * G2[i, j]
                    assert abs(fd - want) <= 2e-6 * max(1.0, abs(want))


def test_gradient_coeffs_fd():
    rng = np.random.default_rng(16)
    for n in (2, 3):
        for _ in range(40):
            st = random_admissible_state(rng, n)
            Gs = geometry.G_gradient_coeffs(st)
            t = 1e-6
            fd = np.array([
                (geometry.curvature_value(st.p + t * e, st.r)
                 - geometry.curvature_value(st.p - t * e, st.r)) / (2 * t)
                for e in np.eye(n)
            ])
            assert np.abs(fd - Gs).max() <= 2e-6 * max(1.0, np.abs(Gs).max())


def test_coeff_ops_raise_outside_cone():
    st = PointState(p=np.zeros(2), r=np.diag([1.0, -1.0]))
    with pytest.raises(NotAdmissible):
        geometry.G_hessian_coeffs(st)
    with pytest.raises(NotAdmissible):
        geometry.G_gradient_coeffs(st)
    # but geometry_at never throws
    g = geometry.geometry_at(st)
    assert not g.admissible and g.margin < 0


def test_euler_identity():
    # f homogeneous of degree n: sum_i f_i kappa_i = n f
    rng = np.random.default_rng(17)
    for n in (2, 3, 5):
        st = random_admissible_state(rng, n)
        g = geometry.geometry_at(st)
        assert float(g.f_i @ g.kappa) == pytest.approx(n * g.K_eta, rel=1e-11)


def test_trace_identities():
    rng = np.random.default_rng(18)
    for n in (2, 3, 4, 6):
        st = random_admissible_state(rng, n)
        g = geometry.geometry_at(st)
        lam = cones.lambda_of(g.kappa)
        P = cones.complementary_products(lam)
        Fhat = geometry.spectral_grad(None, P, g.eigvecs)
        scale = 1.0 + np.abs(Fhat).max()
        assert np.abs(g.F - (np.trace(Fhat) * np.eye(n) - Fhat)).max() <= 1e-10 * scale
        lam_eta = geometry.eta_eigen(st)
        assert abs(np.trace(g.F) - (n - 1) * cones.sigma(lam_eta, n - 1)) <= 1e-10 * scale


def test_eta_eigen_cross_route():
    rng = np.random.default_rng(19)
    for n in (2, 3, 5):
        for _ in range(20):
            st = random_admissible_state(rng, n)
            g = geometry.geometry_at(st)
            lam_eta = geometry.eta_eigen(st)
            lam_a = np.sort(cones.lambda_of(g.kappa))
            assert np.abs(lam_eta - lam_a).max() <= 1e-10 * (1 + np.abs(lam_a).max())
    # identity-Hessian spot value
    st = PointState(p=np.zeros(3), r=np.eye(3))
    assert np.allclose(geometry.eta_eigen(st), [2.0, 2.0, 2.0], atol=1e-14)


def test_rotation_equivariance():
    rng = np.random.default_rng(20)
    for n in (2, 3, 4):
        st = random_admissible_state(rng, n)
        Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
        rot = PointState(p=Q.T @ st.p, r=Q.T @ st.r @ Q)
        g1 = geometry.geometry_at(st)
        g2 = geometry.geometry_at(rot)
        assert np.abs(np.sort(g1.kappa) - np.sort(g2.kappa)).max() <= 1e-10


def test_homogeneity_in_r():
    # K_eta(t r, p) = t^n K_eta(r, p)
    rng = np.random.default_rng(22)
    for n in (2, 3):
        st = random_admissible_state(rng, n)
        for t in (0.5, 2.0, 7.0):
            v = geometry.curvature_value(st.p, t * st.r)
            assert v == pytest.approx(t ** n * geometry.curvature_value(st.p, st.r), rel=1e-10)


def test_lambda_rp():
    assert np.allclose(geometry.lambda_rp(np.eye(3), np.array([1.0, 0, 0])),
                       [0.5, 1.0, 1.0], atol=1e-14)
    # p = 0 reduces to plain eigenvalues
    r = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(geometry.lambda_rp(r, np.zeros(2)), np.linalg.eigvalsh(r), atol=1e-13)


def test_lambda_rp_projection_bound():
    # spectrum of the projected matrix stays in Gamma_k and sigma_j drops by
    # at most the factor 1 + |p|^2
    rng = np.random.default_rng(23)
    for n in (3, 4):
        for k in range(1, n):
            for _ in range(50):
                ev = cones.sample_gamma_k(rng, 1, n, k + 1)[0]
                Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
                r = Q @ np.diag(ev) @ Q.T
                p = rng.normal(size=n)
                s_rp = cones.sigma_all(geometry.lambda_rp(r, p))
                s_r = cones.sigma_all(np.linalg.eigvalsh(r))
                w2 = 1 + p @ p
                for j in range(1, k + 1):
                    assert s_rp[j] > 0
                    assert s_rp[j] >= s_r[j] / w2 - 1e-10 * abs(s_r[j])


def test_ilt_coefficient():
    # identity case: d S_1 / d r_00 at p = 0 is 1
    assert geometry.ilt_coefficient(2 * np.eye(3), np.zeros(3), 1, 0) == pytest.approx(1.0)
    # hand-expanded n = 2 case: S_2(r, p) = det(r)/(1+|p|^2); d/d r_11 = r_00/2 at p=(1,0)
    r = np.array([[1.7, 0.3], [0.3, 0.9]])
    c = geometry.ilt_coefficient(r, np.array([1.0, 0.0]), 2, 1)
    assert c == pytest.approx(r[0, 0] / 2, rel=1e-13)


def test_ilt_coefficient_fd():
    rng = np.random.default_rng(24)
    for n in (2, 3, 4):
        for _ in range(40):
            r = rng.normal(size=(n, n))
            r = 0.5 * (r + r.T)
            p = rng.normal(size=n)
            k = int(rng.integers(1, n + 1))
            i = int(rng.integers(0, n))
            c = geometry.ilt_coefficient(r, p, k, i)
            t = 1e-5
            E = np.zeros((n, n))
            E[i, i] = 1.0
            fd = (geometry.sk_rp(r + t * E, p, k) - geometry.sk_rp(r - t * E, p, k)) / (2 * t)
            assert abs(fd - c) <= 1e-7 * max(1.0, abs(c))
