import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightcone.bounds import evaluate_curve, scaling_bound, zeta_exponent
from lightcone.dynamics import commutator_profile
from lightcone.errors import InsufficientData, InvalidInput
from lightcone.front import beta_probe, extract_front, fit_exponent
from lightcone.lattice import build_lattice, coupling_split
from lightcone.model import build_model


def surface(r, t, fn):
    r, t = np.asarray(r, float), np.asarray(t, float)
    return SimpleNamespace(distances=r, times=t, values=fn(r[:, None], t[None, :]))


def scaling_front(alpha, n_r=41, n_t=4000):
    r = np.geomspace(1e4, 1e6, n_r)
    t = np.geomspace(1e-3, 1e6, n_t)
    curve = evaluate_curve("scaling_form", r, t, alpha=alpha, D=1)
    return fit_exponent(extract_front(curve, 0.1), epsilon=0.1)


class TestExtract:
    def test_short_range_inversion(self):
        v, chi, eps = 2.0, 1.5, 0.1
        r = np.arange(5, 30, dtype=float)
        t = np.linspace(0, 30, 30001)
        curve = surface(r, t, lambda rr, tt: np.minimum(2.0, 2 * np.exp(v * tt - rr / chi)))
        front = extract_front(curve, eps)
        exact = (r / chi + math.log(eps / 2)) / v
        got = np.array([p[1] for p in front])
        assert np.all(np.abs(got - exact) <= t[1] - t[0])
        # linear in r: constant slope 1/(chi v)
        assert np.allclose(np.diff(got) / np.diff(r), 1 / (chi * v), atol=2e-3)

    def test_zero_curve(self):
        assert extract_front(surface([1, 2], [0, 1], lambda r, t: 0 * r * t), 0.1) == []

    def test_step_surface(self):
        r = np.arange(1, 50, dtype=float)
        t = np.linspace(0, 8, 801)
        curve = surface(r, t, lambda rr, tt: (tt >= np.sqrt(rr)).astype(float))
        for rv, tf in extract_front(curve, 0.5):
            assert abs(tf - math.sqrt(rv)) <= t[1] - t[0]

    @pytest.mark.parametrize("eps", [0.0, 2.0, -1.0])
    def test_epsilon_range(self, eps):
        with pytest.raises(InvalidInput):
            extract_front(surface([1], [0, 1], lambda r, t: r * t), eps)

    def test_first_crossing_on_non_monotone_rows(self):
        curve = surface([3.0], [0, 1, 2, 3], lambda r, t: np.array([[0.0, 0.5, 0.0, 1.0]]))
        assert extract_front(curve, 0.25) == [(3.0, 0.5)]

    def test_crossing_at_first_time(self):
        assert extract_front(surface([1.0], [0.5, 1.0], lambda r, t: 1 + 0 * r * t), 0.1) == [(1.0, 0.5)]

    def test_duplicate_distances_merge_by_max(self):
        model = build_model(coupling_split(build_lattice([5]), 3.0, 1.0, 1.0), "full", "XY")
        prof = commutator_profile(model, "Z", 2, "Z", [0, 1, 3, 4], np.linspace(0, 2, 41))
        front = extract_front(prof, 0.2)
        rs = [p[0] for p in front]
        assert rs == sorted(set(rs)) == [1.0, 2.0]

    @settings(max_examples=30)
    @given(st.floats(0.3, 1.5), st.floats(0.5, 3))
    def test_recovers_synthetic_front(self, zeta, scale):
        r = np.arange(1, 40, dtype=float)
        t = np.linspace(0, scale * 40**zeta + 1, 2001)
        curve = surface(r, t, lambda rr, tt: np.where(tt >= scale * rr**zeta, 1.0, 0.0))
        for rv, tf in extract_front(curve, 0.3):
            assert abs(tf - scale * rv**zeta) <= t[1] - t[0]


class TestFit:
    def test_square_root(self):
        r = np.geomspace(1, 1e4, 9)
        fit = fit_exponent(list(zip(r, np.sqrt(r))))
        assert fit.zeta_hat == pytest.approx(0.5, abs=1e-12)
        assert fit.zeta_stderr < 1e-12 and fit.sane

    def test_linear(self):
        r = np.arange(1.0, 10.0)
        assert fit_exponent(list(zip(r, r))).zeta_hat == pytest.approx(1.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            fit_exponent([(1, 1), (2, 2), (3, 3), (4, 4)])

    def test_window(self):
        r = np.arange(1.0, 21.0)
        t = np.where(r <= 10, r, r**0.5)
        fit = fit_exponent(list(zip(r, t)), window=(1, 10))
        assert fit.zeta_hat == pytest.approx(1.0) and fit.fit_window == (1.0, 10.0)
        assert all(1 <= p[0] <= 10 for p in fit.points)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidInput):
            fit_exponent([(0, 1), (1, 1), (2, 1), (3, 1), (4, 1)])

    def test_rejects_repeated_r(self):
        with pytest.raises(InvalidInput):
            fit_exponent([(1, 1), (1, 2), (2, 1), (3, 1), (4, 1)])

    def test_insane_flag(self):
        r = np.arange(1.0, 8.0)
        assert not fit_exponent(list(zip(r, r**2))).sane
        d = fit_exponent(list(zip(r, r))).as_dict()
        assert d["sane"] and d["zeta_hat"] == pytest.approx(1.0)

    @settings(max_examples=40)
    @given(st.floats(0.2, 1.4), st.floats(0.01, 100), st.floats(0.1, 10), st.integers(0, 1000))
    def test_scale_invariance(self, zeta, s, amp, seed):
        rng = np.random.default_rng(seed)
        r = np.sort(rng.uniform(1, 1000, 12))
        t = amp * r**zeta * np.exp(rng.normal(0, 0.1, 12))
        a = fit_exponent(list(zip(r, t)))
        b = fit_exponent(list(zip(s * r, s**zeta * t)))
        assert b.zeta_hat == pytest.approx(a.zeta_hat, abs=1e-10)

    def test_optimized_bound_alpha3(self):
        fit = scaling_front(3.0)
        assert fit.zeta_hat == pytest.approx(1 / 3, rel=0.05)

    def test_zeta_non_decreasing_in_alpha(self):
        z = [scaling_front(a, n_r=11, n_t=2000).zeta_hat for a in (2.5, 3, 4, 6, 10)]
        assert all(b >= a for a, b in zip(z, z[1:]))
        for a, zh in zip((2.5, 3, 4, 6, 10), z):
            assert zh == pytest.approx(zeta_exponent(a, 1), rel=0.05)


class TestBetaProbe:
    def curve(self, r, t):
        return scaling_bound(r, t, 3.0, 1)

    def test_outside_cone_decreases(self):
        probe = beta_probe(self.curve, 3.5, np.geomspace(1e2, 1e4, 9))
        assert probe.decreasing
        assert len(probe.values) == 9

    def test_inside_cone_increases(self):
        # below the cap exp(700) so the growth is visible
        probe = beta_probe(self.curve, 0.5, np.linspace(10, 300, 8))
        assert not probe.decreasing
        assert np.all(np.diff(probe.values) > 0)

    def test_zero_curve(self):
        probe = beta_probe(lambda r, t: 0.0, 2.0, [1, 2, 3])
        assert probe.values == [0.0, 0.0, 0.0] and probe.decreasing

    def test_bad_beta(self):
        with pytest.raises(InvalidInput):
            beta_probe(self.curve, 0.0, [1, 2])

    def test_as_dict(self):
        d = beta_probe(self.curve, 3.5, [100, 1000]).as_dict()
        assert set(d) == {"beta", "t", "values", "decreasing"}
