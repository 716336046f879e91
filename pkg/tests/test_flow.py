import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from pfm.flow import FlowField, estimate_flow, kinematic_maps

from conftest import textured


def shifted(img, dx, dy):
    return np.roll(np.roll(img, dy, axis=0), dx, axis=1)


def test_identical_frames_zero_flow(texture):
    f = estimate_flow(texture, texture)
    assert np.abs(f.u).max() <= 1e-3 and np.abs(f.v).max() <= 1e-3


def test_constant_frames_zero_flow():
    g = np.full((48, 64), 0.4)
    f = estimate_flow(g, g)
    assert np.abs(f.u).max() <= 1e-3 and np.abs(f.v).max() <= 1e-3


def test_translation_right(texture):
    f = estimate_flow(texture, shifted(texture, 3, 0))
    inner = (slice(12, -12), slice(12, -12))
    assert np.abs(f.u[inner] - 3.0).max() <= 0.25
    assert np.abs(f.v[inner]).max() <= 0.25


def test_translation_diagonal(texture):
    f = estimate_flow(texture, shifted(texture, -2, 1))
    inner = (slice(12, -12), slice(12, -12))
    assert np.abs(f.u[inner] + 2.0).max() <= 0.25
    assert np.abs(f.v[inner] - 1.0).max() <= 0.25


def _grid(h=30, w=40):
    y, x = np.mgrid[0:h, 0:w].astype(float)
    return x, y


def test_expansion_field():
    x, y = _grid()
    k = kinematic_maps(FlowField(0.1 * x, 0.1 * y))
    inner = (slice(1, -1), slice(1, -1))
    np.testing.assert_allclose(k.div[inner], 0.2, atol=1e-12)
    np.testing.assert_allclose(k.curl[inner], 0.0, atol=1e-12)
    np.testing.assert_allclose(k.shear[inner], 0.0, atol=1e-12)


def test_rotation_field_sign():
    x, y = _grid()
    w = 0.1
    k = kinematic_maps(FlowField(-w * y, w * x))
    inner = (slice(1, -1), slice(1, -1))
    np.testing.assert_allclose(k.curl[inner], 2 * w, atol=1e-12)
    np.testing.assert_allclose(k.div[inner], 0.0, atol=1e-12)
    np.testing.assert_allclose(k.shear[inner], 0.0, atol=1e-12)


def stencil_oracle(u, v):
    """Per-pixel finite differences written out longhand."""
    h, w = u.shape
    out = {k: np.zeros((h, w)) for k in ("div", "curl", "hyp1", "hyp2", "shear")}

    def d(f, yy, xx, axis):
        if axis == 1:
            if xx == 0:
                return f[yy, 1] - f[yy, 0]
            if xx == w - 1:
                return f[yy, w - 1] - f[yy, w - 2]
            return (f[yy, xx + 1] - f[yy, xx - 1]) / 2.0
        if yy == 0:
            return f[1, xx] - f[0, xx]
        if yy == h - 1:
            return f[h - 1, xx] - f[h - 2, xx]
        return (f[yy + 1, xx] - f[yy - 1, xx]) / 2.0

    for yy in range(h):
        for xx in range(w):
            ux, uy = d(u, yy, xx, 1), d(u, yy, xx, 0)
            vx, vy = d(v, yy, xx, 1), d(v, yy, xx, 0)
            out["div"][yy, xx] = ux + vy
            out["curl"][yy, xx] = -uy + vx
            out["hyp1"][yy, xx] = ux - vy
            out["hyp2"][yy, xx] = uy + vx
            out["shear"][yy, xx] = (out["hyp1"][yy, xx] ** 2 + out["hyp2"][yy, xx] ** 2) ** 0.5
    return out


def test_random_smooth_flow_matches_stencil():
    u = textured((25, 31), seed=5, sigma=3) * 4 - 2
    v = textured((25, 31), seed=6, sigma=3) * 4 - 2
    k = kinematic_maps(FlowField(u, v))
    ref = stencil_oracle(u, v)
    for name, plane in ref.items():
        np.testing.assert_allclose(getattr(k, name), plane, atol=1e-10, rtol=0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    u1, v1, u2, v2 = rng.normal(size=(4, 12, 14))
    k1 = kinematic_maps(FlowField(u1, v1))
    k2 = kinematic_maps(FlowField(u2, v2))
    k = kinematic_maps(FlowField(a * u1 + b * u2, a * v1 + b * v2))
    for name in ("div", "curl", "hyp1", "hyp2"):
        np.testing.assert_allclose(getattr(k, name), a * getattr(k1, name) + b * getattr(k2, name),
                                   atol=1e-9)
    assert np.all(k.shear >= 0)


def test_shear_symmetric_in_hyperbolic_terms():
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(2, 10, 10))
    k = kinematic_maps(FlowField(u, v))
    np.testing.assert_allclose(k.shear, np.hypot(-k.hyp2, k.hyp1), atol=1e-14)
