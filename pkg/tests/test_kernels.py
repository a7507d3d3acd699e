import numpy as np
import pytest

from glap import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def both(fn, *args):
    prev = _kernels.set_backend("numba")
    try:
        a = fn(*args)
        _kernels.set_backend("numpy")
        b = fn(*args)
    finally:
        _kernels.set_backend(prev)
    return a, b


@needs_numba
@pytest.mark.parametrize("wrap", [False, True])
def test_bilinear_backends_agree(wrap):
    rng = np.random.default_rng(0)
    img = rng.random((17, 23, 3))
    u = rng.uniform(-5, 28, 5000)
    v = rng.uniform(-3, 20, 5000)
    a, b = both(_kernels.bilinear_sample, img, u, v, wrap)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


@needs_numba
@pytest.mark.parametrize("wrap", [False, True])
def test_cca_backends_agree(wrap):
    rng = np.random.default_rng(1)
    lab = rng.integers(0, 3, (48, 64))
    a, b = both(_kernels.connected_components, lab, wrap)
    assert np.array_equal(a, b)


def test_bilinear_exact_on_pixel_centres(backend):
    img = np.arange(60, dtype=float).reshape(4, 5, 3)
    r, c = np.meshgrid(np.arange(4.0), np.arange(5.0), indexing="ij")
    out = _kernels.bilinear_sample(img, c.ravel(), r.ravel())
    assert np.array_equal(out, img.reshape(-1, 3))


def test_bilinear_reproduces_linear_ramp(backend):
    yy, xx = np.mgrid[0:8, 0:9].astype(float)
    img = (2 * xx - 3 * yy + 1)[..., None]
    rng = np.random.default_rng(2)
    u, v = rng.uniform(0, 8, 200), rng.uniform(0, 7, 200)
    assert np.allclose(_kernels.bilinear_sample(img, u, v)[:, 0], 2 * u - 3 * v + 1, atol=1e-12)


def test_wrap_seam(backend):
    img = np.zeros((2, 4, 1))
    img[:, 0] = 8.0
    out = _kernels.bilinear_sample(img, np.array([3.5, -0.5, 4.0]), np.zeros(3), wrap=True)
    assert np.allclose(out[:, 0], [4.0, 4.0, 8.0])


def test_set_backend_validation():
    with pytest.raises(ValueError):
        _kernels.set_backend("cuda")
    assert _kernels.get_backend() in ("numba", "numpy")
