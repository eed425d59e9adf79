import numpy as np
import pytest
from scipy import stats

from rqa_pinn.geometry import sample_boundary, sample_initial, sample_interior, substream


def test_one_dimensional_ball_is_uniform_interval():
    x = sample_interior(5000, 1, None, substream(0, "interior")).x[:, 0]
    assert stats.kstest(x, stats.uniform(-1, 2).cdf).pvalue > 0.01


def test_quarter_of_disc_mass_inside_half_radius():
    x = sample_interior(100_000, 2, None, substream(1, "interior")).x
    frac = np.mean(np.linalg.norm(x, axis=1) <= 0.5)
    assert frac == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("d", [2, 5])
def test_radius_deciles_chi_square(d):
    r = np.linalg.norm(sample_interior(20_000, d, 1.0, substream(2, "interior")).x, axis=1)
    # P(|x| <= s) = s**d, so (k/10)**(1/d) cut the radius into equal-mass bins
    edges = (np.arange(11) / 10.0) ** (1.0 / d)
    counts, _ = np.histogram(r, edges)
    assert stats.chisquare(counts).pvalue > 0.01


@pytest.mark.parametrize("d", [2, 5])
def test_interior_strictly_inside_and_times_open(d):
    b = sample_interior(3000, d, 1.0, substream(3, "interior"))
    r = np.linalg.norm(b.x, axis=1)
    assert r.max() < 1.0 and r.min() > 0.0
    assert b.t.min() > 0.0 and b.t.max() < 1.0
    assert stats.kstest(b.t, "uniform").pvalue > 0.01


def test_stationary_batch_has_no_times():
    b = sample_interior(10, 3, None, substream(0, "interior"))
    assert b.t is None
    np.testing.assert_array_equal(b.times(), 0.0)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_boundary_on_unit_sphere(d):
    x = sample_boundary(2000, d, 1.0, substream(4, "boundary")).x
    assert np.abs(np.linalg.norm(x, axis=1) - 1.0).max() < 1e-12


def test_boundary_angles_uniform_on_circle():
    x = sample_boundary(5000, 2, None, substream(5, "boundary")).x
    theta = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
    assert stats.kstest(theta, stats.uniform(0, 2 * np.pi).cdf).pvalue > 0.01


def test_initial_batch_at_time_zero():
    b = sample_initial(500, 3, substream(6, "initial"))
    np.testing.assert_array_equal(b.t, 0.0)
    assert np.linalg.norm(b.x, axis=1).max() < 1.0
    assert b.role == "initial"


@pytest.mark.parametrize("sampler", [
    lambda n: sample_interior(n, 2, 1.0, substream(0, "interior")),
    lambda n: sample_boundary(n, 2, 1.0, substream(0, "boundary")),
    lambda n: sample_initial(n, 2, substream(0, "initial")),
])
def test_rejects_empty_batches(sampler):
    with pytest.raises(ValueError):
        sampler(0)


def test_same_seed_same_batch():
    a = sample_interior(50, 3, 1.0, substream(7, "interior", 12))
    b = sample_interior(50, 3, 1.0, substream(7, "interior", 12))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.t, b.t)


def test_substreams_differ_by_role_iteration_and_seed():
    base = substream(7, "interior", 1).random(4)
    assert not np.array_equal(base, substream(7, "interior", 2).random(4))
    assert not np.array_equal(base, substream(7, "boundary", 1).random(4))
    assert not np.array_equal(base, substream(8, "interior", 1).random(4))
