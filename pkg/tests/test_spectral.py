import numpy as np
import pytest

from mpdns.errors import ConfigError
from mpdns.spectral import (SpectralScalarField, SpectralVectorField, curl, dealias, divergence,
                            fft_workers, forward, from_half, grad_div, gradient, gradient_norm_sq,
                            half_inner, hermitian_error, inner_product, inverse_half, is_solenoidal,
                            l2_norm_sq, laplacian, leray_project, lp_norm, make_grid,
                            partial_derivative, random_coefficients, split_workers, to_half,
                            to_physical, to_spectral)


def _scalar(grid, func):
    x1, x2, x3 = grid.coordinates()
    return to_spectral(func(x1, x2, x3) + np.zeros(grid.shape), grid)


def _vector(grid, *funcs):
    x1, x2, x3 = grid.coordinates()
    return to_spectral(np.stack([f(x1, x2, x3) + np.zeros(grid.shape) for f in funcs]), grid)


class TestGrid:
    def test_layout(self, grid8):
        assert grid8.dealias_cutoff == 2
        assert sorted(grid8.wavenumbers) == list(range(-3, 5))
        assert grid8.wavenumber_of(4) == 4
        assert grid8.wavenumber_of(7) == -1
        assert grid8.index_of(-1) == 7
        assert grid8.index_of(4) == 4

    def test_self_inverse_indexing(self, grid16):
        for i in range(16):
            assert grid16.index_of(grid16.wavenumber_of(i)) == i

    @pytest.mark.parametrize("n", [4, 12, 100])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ConfigError):
            make_grid(n)

    def test_cached(self):
        assert make_grid(8) is make_grid(8)

    def test_nyquist_dropped_from_odd_derivatives(self, grid8):
        assert grid8.k[0][4, 0, 0] == 0.0
        assert grid8.k_sq[4, 0, 0] == 16.0

    def test_fft_workers(self, monkeypatch):
        monkeypatch.setenv("MPDNS_THREADS", "4")
        assert fft_workers() == 4
        monkeypatch.setenv("MPDNS_THREADS", "many")
        assert fft_workers() == 1

    @pytest.mark.parametrize("total, tasks, split", [(4, 3, (3, 1)), (8, 2, (2, 4)), (1, 5, (1, 1)),
                                                     (6, 6, (6, 1))])
    def test_split_workers(self, total, tasks, split):
        assert split_workers(total, tasks) == split

    def test_half_lattice(self, grid8):
        assert grid8.half_shape == (8, 8, 5)
        assert grid8.half_weight[0, 0, 0] == 1.0
        assert grid8.half_weight[0, 0, 1] == 2.0
        assert grid8.half_weight[0, 0, 4] == 1.0


class TestTransforms:
    def test_cosine_coefficients(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.cos(x))
        assert f.coeffs[1, 0, 0] == pytest.approx(0.5, abs=1e-14)
        assert f.coeffs[7, 0, 0] == pytest.approx(0.5, abs=1e-14)
        rest = np.array(f.coeffs)
        rest[1, 0, 0] = rest[7, 0, 0] = 0
        assert np.abs(rest).max() < 1e-14

    def test_roundtrip(self, grid8, rng):
        samples = rng.standard_normal(grid8.shape)
        assert np.allclose(to_physical(to_spectral(samples)), samples, atol=1e-13)

    def test_mean_is_zero_mode(self, grid8):
        f = _scalar(grid8, lambda x, y, z: 3.0 + np.sin(y))
        assert f.mean() == pytest.approx(3.0)

    def test_shape_mismatch(self, grid8):
        with pytest.raises(ValueError):
            to_spectral(np.zeros((2, 8, 8, 8)), grid8)

    def test_fields_are_read_only(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x))
        with pytest.raises(ValueError):
            f.coeffs[0, 0, 0] = 1.0

    def test_half_lattice_roundtrip(self, grid8, rng):
        samples = rng.standard_normal((3,) + grid8.shape)
        coeffs = forward(samples)
        assert np.allclose(from_half(to_half(coeffs)), coeffs, atol=1e-15)
        assert np.allclose(inverse_half(to_half(coeffs), 8), samples, atol=1e-13)

    def test_half_inner_matches_full(self, grid8, rng):
        f = SpectralScalarField(grid8, random_coefficients(grid8, rng, 2, -1.0))
        g = SpectralScalarField(grid8, random_coefficients(grid8, rng, 2, -1.0))
        half = half_inner(to_half(f.coeffs), to_half(g.coeffs), grid8)
        assert half == pytest.approx(inner_product(f, g), rel=1e-12)

    def test_components(self, grid8):
        foreign = _scalar(make_grid(16), lambda x, y, z: np.sin(x))
        v = _vector(grid8, lambda x, y, z: np.sin(y), lambda x, y, z: np.cos(z), lambda x, y, z: np.sin(x))
        rebuilt = SpectralVectorField.from_components(v.components)
        assert np.array_equal(rebuilt.coeffs, v.coeffs)
        with pytest.raises(ValueError):
            SpectralVectorField.from_components(v.components[:2])
        with pytest.raises(ValueError):
            SpectralVectorField.from_components(v.components[:2] + (foreign,))

    def test_dealias_removes_high_modes(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.cos(3 * x) + np.cos(y))
        values = to_physical(dealias(f))
        x1, x2, _ = grid8.coordinates()
        assert np.allclose(values, np.cos(x2) + np.zeros(grid8.shape), atol=1e-14)


class TestOperators:
    def test_derivative_of_sine(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x))
        x1, _, _ = grid8.coordinates()
        assert np.allclose(to_physical(partial_derivative(f, 1)), np.cos(x1) + np.zeros(grid8.shape),
                           atol=1e-13)
        assert np.abs(partial_derivative(f, 2).coeffs).max() < 1e-14

    def test_bad_axis(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x))
        with pytest.raises(ValueError):
            partial_derivative(f, 0)

    def test_curl_of_shear(self, grid8):
        v = _vector(grid8, lambda x, y, z: 0 * x, lambda x, y, z: 0 * x, lambda x, y, z: np.sin(x))
        w = to_physical(curl(v))
        x1, _, _ = grid8.coordinates()
        assert np.abs(w[0]).max() < 1e-13
        assert np.allclose(w[1], -np.cos(x1) + np.zeros(grid8.shape), atol=1e-13)
        assert np.abs(w[2]).max() < 1e-13

    def test_curl_of_rotation(self, grid8):
        v = _vector(grid8, lambda x, y, z: -np.sin(y), lambda x, y, z: np.sin(x), lambda x, y, z: 0 * x)
        w = to_physical(curl(v))
        x1, x2, _ = grid8.coordinates()
        assert np.allclose(w[2], np.cos(x1) + np.cos(x2), atol=1e-13)

    def test_curl_is_solenoidal(self, grid8, rng):
        coeffs = np.stack([random_coefficients(grid8, rng, 2, -1.0) for _ in range(3)])
        v = SpectralVectorField(grid8, coeffs)
        assert is_solenoidal(curl(v))
        assert np.abs(divergence(curl(v)).coeffs).max() < 1e-13

    def test_leray_removes_gradients(self, grid8):
        g = gradient(_scalar(grid8, lambda x, y, z: np.sin(x) * np.sin(2 * y)))
        assert np.abs(leray_project(g).coeffs).max() < 1e-14

    def test_leray_keeps_solenoidal(self, grid8):
        v = _vector(grid8, lambda x, y, z: np.sin(y), lambda x, y, z: np.cos(z), lambda x, y, z: np.sin(x))
        assert np.allclose(leray_project(v).coeffs, v.coeffs, atol=1e-15)

    def test_leray_keeps_mean(self, grid8):
        v = _vector(grid8, lambda x, y, z: 1.0 + 0 * x, lambda x, y, z: 0 * x, lambda x, y, z: 0 * x)
        assert leray_project(v).coeffs[0, 0, 0, 0] == pytest.approx(1.0)

    def test_laplacian_of_eigenfunction(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x) * np.cos(2 * z))
        assert np.allclose(laplacian(f).coeffs, -5 * f.coeffs, atol=1e-14)

    def test_grad_div(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x) * np.cos(2 * z))
        assert np.allclose(grad_div(gradient(f)).coeffs, gradient(laplacian(f)).coeffs, atol=1e-13)
        v = _vector(grid8, lambda x, y, z: np.sin(y), lambda x, y, z: np.cos(z), lambda x, y, z: np.sin(x))
        assert np.abs(grad_div(v).coeffs).max() < 1e-14

    def test_arithmetic(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x))
        g = _scalar(grid8, lambda x, y, z: np.cos(y))
        assert np.allclose((2 * f - g + (-f)).coeffs, (f - g).coeffs)
        with pytest.raises(ValueError):
            f + _scalar(make_grid(16), lambda x, y, z: np.sin(x))


class TestNorms:
    def test_sine_norms(self, grid8):
        f = _scalar(grid8, lambda x, y, z: np.sin(x))
        assert lp_norm(f, 2) == pytest.approx(2 * np.pi ** 1.5, rel=1e-12)
        assert l2_norm_sq(f) == pytest.approx(4 * np.pi ** 3, rel=1e-12)
        assert gradient_norm_sq(f) == pytest.approx(4 * np.pi ** 3, rel=1e-12)
        assert lp_norm(f, np.inf) == pytest.approx(1.0)

    def test_parseval(self, grid8, rng):
        f = SpectralScalarField(grid8, random_coefficients(grid8, rng, 2, -1.0))
        g = SpectralScalarField(grid8, random_coefficients(grid8, rng, 2, -1.0))
        quadrature = grid8.spacing ** 3 * np.sum(to_physical(f) * to_physical(g))
        assert inner_product(f, g) == pytest.approx(quadrature, rel=1e-10)
        assert lp_norm(f, 2) ** 2 == pytest.approx(l2_norm_sq(f), rel=1e-12)

    def test_vector_norm_uses_magnitude(self, grid8):
        v = _vector(grid8, lambda x, y, z: np.sin(x), lambda x, y, z: np.cos(x), lambda x, y, z: 0 * x)
        assert lp_norm(v, np.inf) == pytest.approx(1.0)
        assert lp_norm(v, 4) == pytest.approx((2 * np.pi) ** 0.75, rel=1e-12)

    def test_rejects_small_p(self, grid8):
        with pytest.raises(ValueError):
            lp_norm(_scalar(grid8, lambda x, y, z: np.sin(x)), 0.5)

    def test_large_exponents_stay_finite(self, grid16, rng):
        f = SpectralScalarField(grid16, random_coefficients(grid16, rng, 5, -1.0))
        peak = lp_norm(f, np.inf)
        high = lp_norm(f, 3000)
        assert peak * grid16.spacing ** (3 / 3000) < high <= peak * grid16.volume ** (1 / 3000)
        assert lp_norm(f * 1e3, 600) == pytest.approx(1e3 * lp_norm(f, 600), rel=1e-12)

    def test_zero_field(self, grid8):
        f = SpectralScalarField(grid8, np.zeros(grid8.shape, dtype=complex))
        assert lp_norm(f, 4) == 0.0
        assert lp_norm(f, np.inf) == 0.0


class TestRandomCoefficients:
    def test_hermitian(self, grid16, rng):
        coeffs = random_coefficients(grid16, rng, 5, -1.0)
        assert hermitian_error(SpectralScalarField(grid16, coeffs)) < 1e-14
        assert coeffs[0, 0, 0] == 0

    def test_same_function_on_finer_grid(self):
        coarse = random_coefficients(make_grid(8), np.random.default_rng(7), 2, -1.0)
        fine = random_coefficients(make_grid(16), np.random.default_rng(7), 2, -1.0)
        for k in [(1, 0, 0), (-1, 2, 1), (2, -2, 0)]:
            assert coarse[tuple(np.mod(k, 8))] == pytest.approx(fine[tuple(np.mod(k, 16))])

    def test_shell(self, grid16, rng):
        coeffs = random_coefficients(grid16, rng, 3, 0.0, shell=True)
        k_mag = grid16.k_mag[np.abs(coeffs) > 0]
        assert np.all((k_mag > 2) & (k_mag <= 3))

    def test_too_wide(self, grid8, rng):
        with pytest.raises(ValueError):
            random_coefficients(grid8, rng, 4, -1.0)


class TestIdentities:
    def test_projection_idempotent(self, grid8, rng):
        v = SpectralVectorField(grid8, np.stack([random_coefficients(grid8, rng, 2, -1.0) for _ in range(3)]))
        once = leray_project(v)
        assert np.abs(leray_project(once).coeffs - once.coeffs).max() < 1e-12

    def test_curl_of_gradient(self, grid8, rng):
        f = SpectralScalarField(grid8, random_coefficients(grid8, rng, 2, -1.0))
        assert np.abs(curl(gradient(f)).coeffs).max() < 1e-12

    def test_derivatives_commute(self, grid8, rng):
        f = SpectralScalarField(grid8, random_coefficients(grid8, rng, 2, -1.0))
        a = partial_derivative(partial_derivative(f, 1), 2)
        b = partial_derivative(partial_derivative(f, 2), 1)
        assert np.abs(a.coeffs - b.coeffs).max() < 1e-14
