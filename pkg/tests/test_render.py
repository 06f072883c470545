import numpy as np
import pytest

from conftest import random_set
from oracles import densities_generic, fd_gradient, frozen_fd_gradient, frozen_l1_loss, naive_sum, topk_by_sort
from splatcodec import _kernels
from splatcodec.gaussian import Gaussian2D, GaussianSet
from splatcodec.render import (
    EPS_NORM,
    EmptySetError,
    Gradients,
    backward,
    pixel_centers,
    render_image,
    render_naive,
    render_points,
    render_topk,
    select_top_k,
)


def one(mu=(0.5, 0.5), theta=0.0, scale=(0.1, 0.1), color=(0.2, 0.4, 0.6)):
    return GaussianSet.from_gaussians([Gaussian2D(mu, theta, scale, color)])


def twins(c1=(1.0, 0.0, 0.0), c2=(0.0, 0.0, 1.0)):
    a = Gaussian2D((0.5, 0.5), 0.3, (0.1, 0.05), c1)
    b = Gaussian2D((0.5, 0.5), 0.3, (0.1, 0.05), c2)
    return GaussianSet.from_gaussians([a, b])


def test_pixel_centers():
    u, v = pixel_centers(4, 2)
    np.testing.assert_allclose(u[:4], [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(v[::4], [0.25, 0.75])


def test_naive_single_gaussian_at_mean():
    np.testing.assert_array_equal(render_naive(one(), (0.5, 0.5)), [0.2, 0.4, 0.6])


def test_naive_superposition_is_unnormalized():
    np.testing.assert_allclose(render_naive(twins((0.8, 0.6, 0.0), (0.7, 0.6, 0.1)), (0.5, 0.5)),
                               [1.5, 1.2, 0.1])


def test_naive_matches_reverse_order_sum(rng):
    gs = random_set(rng, 20)
    for x in rng.random((50, 2)):
        np.testing.assert_allclose(render_naive(gs, x), naive_sum(gs.to_matrix(), x), rtol=0, atol=1e-10)


def test_empty_set_errors():
    empty = GaussianSet.empty()
    with pytest.raises(EmptySetError):
        render_naive(empty, (0.5, 0.5))
    with pytest.raises(EmptySetError):
        render_topk(empty, (0.5, 0.5))
    with pytest.raises(EmptySetError):
        render_image(empty, 4, 4)


def test_select_returns_all_when_k_exceeds_population(rng):
    sel = select_top_k(random_set(rng, 3), (0.5, 0.5), k=10)
    assert sorted(sel.indices.tolist()) == [0, 1, 2]
    assert np.all(np.diff(sel.weights) <= 0)


def test_select_tie_prefers_smaller_index():
    sel = select_top_k(twins(), (0.52, 0.47), k=1)
    assert sel.indices.tolist() == [0]


def test_select_matches_full_sort(rng):
    gs = random_set(rng, 100, scale=(0.05, 0.3))
    pts = rng.random((20, 2))
    dens = densities_generic(gs.to_matrix(), pts)
    for p, x in enumerate(pts):
        sel = select_top_k(gs, x, k=10)
        assert sel.indices.tolist() == topk_by_sort(dens[p], 10)


def test_select_ties_among_underflowed_densities():
    # every density is exactly 0 far from tiny Gaussians; ranking falls back to index order
    gs = GaussianSet(np.array([[0.9, 0.9], [0.1, 0.1], [0.95, 0.95]]), np.zeros(3),
                     np.full((3, 2), 1e-4), np.eye(3))
    sel = select_top_k(gs, (0.5, 0.5), k=2)
    assert sel.indices.tolist() == [0, 1]
    np.testing.assert_array_equal(sel.weights, [0.0, 0.0])


def test_topk_single_gaussian_returns_its_color():
    gs = one(scale=(0.05, 0.02), theta=1.0)
    for x in [(0.5, 0.5), (0.52, 0.51), (0.49, 0.49)]:
        # exact up to the eps_norm term in the denominator
        np.testing.assert_allclose(render_topk(gs, x), [0.2, 0.4, 0.6], rtol=1e-7)


def test_topk_equal_density_is_average():
    np.testing.assert_allclose(render_topk(twins(), (0.51, 0.52)), [0.5, 0.0, 0.5], rtol=1e-7)


def test_topk_full_k_equals_normalized_naive(rng):
    gs = random_set(rng, 50, scale=(0.05, 0.3))
    for x in rng.random((30, 2)):
        dens = densities_generic(gs.to_matrix(), x[None, :])[0]
        expected = render_naive(gs, x) / (EPS_NORM + dens.sum())
        np.testing.assert_allclose(render_topk(gs, x, k=50), expected, rtol=0, atol=1e-10)


def test_topk_far_from_everything_is_zero():
    out = render_topk(one(mu=(0.0, 0.0), scale=(1e-4, 1e-4)), (1.0, 1.0))
    np.testing.assert_array_equal(out, [0.0, 0.0, 0.0])


def test_topk_convex_hull(rng):
    gs = random_set(rng, 40, scale=(0.03, 0.2))
    pts = rng.random((500, 2))
    out = render_points(gs, pts, k=10)
    idx, w = _kernels.select_points(pts[:, 0].copy(), pts[:, 1].copy(), gs.means, *gs.kernel_params(), 10)
    for p in range(len(pts)):
        if w[p].sum() <= 1e-4:
            continue
        cols = gs.colors[idx[p]]
        assert np.all(out[p] >= cols.min(0) - 1e-6)
        assert np.all(out[p] <= cols.max(0) + 1e-6)


def test_topk_order_invariance(rng):
    gs = random_set(rng, 60, scale=(0.02, 0.15))
    perm = rng.permutation(len(gs))
    pts = rng.random((400, 2))
    a = render_points(gs, pts)
    b = render_points(gs.permuted(perm), pts)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)


def test_render_image_single_red_gaussian():
    gs = one(mu=(0.5, 0.5), theta=0.4, scale=(0.2, 0.1), color=(1.0, 0.0, 0.0))
    img = render_image(gs, 32, 32)
    u, v = pixel_centers(32, 32)
    du, dv = u - 0.5, v - 0.5
    c, s = np.cos(0.4), np.sin(0.4)
    inside = ((c * du + s * dv) / 0.2) ** 2 + ((c * dv - s * du) / 0.1) ** 2 <= 1.0
    red = img.reshape(-1, 3)[inside]
    assert inside.sum() > 50
    np.testing.assert_allclose(red, np.tile([1.0, 0.0, 0.0], (inside.sum(), 1)), rtol=0, atol=1e-7)
    assert np.all(img[..., 1:] == 0.0)


def test_render_image_resolution_consistency(rng):
    gs = random_set(rng, 30, scale=(0.08, 0.25), mu=(0.1, 0.9))
    small = render_image(gs, 64, 64)
    big = render_image(gs, 128, 128)
    down = big.reshape(64, 2, 64, 2, 3).mean(axis=(1, 3))
    assert np.abs(small - down).mean() < 0.02


def test_render_image_is_clamped():
    gs = one(color=(1.0, 1.0, 1.0))
    img = render_image(gs, 16, 8)
    assert img.shape == (8, 16, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_backward_single_gaussian():
    gs = one(theta=0.3, scale=(0.07, 0.03))
    up = np.array([[0.3, -0.7, 1.1]])
    gr = backward(gs, np.array([[0.52, 0.49]]), up)
    np.testing.assert_allclose(gr.color[0], up[0], rtol=1e-7)
    # only the eps_norm term leaves a residual geometric gradient
    assert np.all(np.abs(gr.mu) < 1e-6)
    assert abs(gr.theta[0]) < 1e-6
    assert np.all(np.abs(gr.scale) < 1e-6)


def test_backward_equal_density_split():
    gr = backward(twins(), np.array([[0.51, 0.5]]), np.array([[1.0, 0.0, 0.0]]))
    np.testing.assert_allclose(gr.color, [[0.5, 0, 0], [0.5, 0, 0]], rtol=1e-7)


def test_backward_rejects_non_finite_upstream(rng):
    with pytest.raises(ValueError):
        backward(random_set(rng, 3), np.array([[0.5, 0.5]]), np.array([[np.nan, 0, 0]]))


def _frozen_fd_check(rng, n=30, n_samples=100, k=10):
    gs = random_set(rng, n, scale=(0.05, 0.2))
    pts = rng.random((n_samples, 2))
    targets = rng.random((n_samples, 3))
    idx, _ = _kernels.select_points(pts[:, 0].copy(), pts[:, 1].copy(), gs.means, *gs.kernel_params(), k)
    cr = render_points(gs, pts, k)
    gr = backward(gs, pts, np.sign(cr - targets), k)
    analytic = np.concatenate([gr.mu, gr.theta[:, None], gr.scale, gr.color], axis=1)
    fd = frozen_fd_gradient(gs.to_matrix(), pts, idx, targets)
    return analytic, fd, idx


def max_rel_error(analytic, fd):
    floor = 1e-6 * np.max(np.abs(fd))
    return float(np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), floor)))


def test_backward_matches_frozen_fd(rng):
    analytic, fd, _ = _frozen_fd_check(rng)
    assert max_rel_error(analytic, fd) <= 1e-4


def test_backward_zero_outside_selection(rng):
    gs = random_set(rng, 40, scale=(0.01, 0.03))
    pts = rng.uniform(0.0, 0.3, (20, 2))
    idx, _ = _kernels.select_points(pts[:, 0].copy(), pts[:, 1].copy(), gs.means, *gs.kernel_params(), 10)
    gr = backward(gs, pts, rng.normal(size=(20, 3)))
    unused = np.setdiff1d(np.arange(len(gs)), idx.ravel())
    assert unused.size > 0
    for arr in (gr.mu, gr.theta, gr.scale, gr.color):
        assert np.all(arr[unused] == 0.0)


def test_backward_partial_accumulators_merge(rng):
    gs = random_set(rng, 50, scale=(0.03, 0.2))
    pts = rng.random((300, 2))
    up = rng.normal(size=(300, 3))
    whole = backward(gs, pts, up)
    merged = Gradients.zeros(len(gs))
    for chunk in np.array_split(np.arange(300), 7):
        merged = merged.merge(backward(gs, pts[chunk], up[chunk]))
    for a, b in zip((whole.mu, whole.theta, whole.scale, whole.color),
                    (merged.mu, merged.theta, merged.scale, merged.color)):
        np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8)


def test_restricted_fd_matches_full_sum_fd(rng):
    # the per-Gaussian restricted differences agree with differencing the whole loss
    gs = random_set(rng, 12, scale=(0.05, 0.2))
    pts = rng.random((40, 2))
    targets = rng.random((40, 3))
    idx, _ = _kernels.select_points(pts[:, 0].copy(), pts[:, 1].copy(), gs.means, *gs.kernel_params(), 5)
    full = fd_gradient(lambda m: frozen_l1_loss(m, pts, idx, targets), gs.to_matrix(), h=1e-5)
    restricted = frozen_fd_gradient(gs.to_matrix(), pts, idx, targets, h=1e-5)
    np.testing.assert_allclose(restricted, full, rtol=1e-5, atol=1e-8 * np.abs(full).max())
