"""Association cost chain: heading penalty, divergence scaling, baselines."""

import math

import numpy as np
import pytest

from ugtrack.costs import (
    CostConfig,
    CostKind,
    HeadingMode,
    guided_cost,
    heading_penalty,
    mahalanobis_cost,
    mean_covariance,
    modified_divergence,
    pair_cost,
    project_track,
    wrap_heading_residual,
)
from ugtrack.errors import ConfigError
from ugtrack.gaussian import GaussianNd, js_divergence
from ugtrack.io_formats import default_config_path, load_config
from ugtrack.kalman import (
    ClassNoise,
    Detection,
    NoiseConfig,
    TrackState,
    init_track,
    predict,
    update,
)

DT = 0.1


def make_noise(det=0.04, kin=0.3, q_obs=0.01, q_vel=0.02, r=0.04):
    cn = ClassNoise(
        det_var=np.full(7, det),
        kin_var=np.full(3, kin),
        q_var=np.concatenate([np.full(7, q_obs), np.full(3, q_vel)]),
        r_var=np.full(7, r),
    )
    return NoiseConfig(dt=DT, classes={"car": cn})


def shipped_config():
    return load_config(default_config_path())


def shipped_detection(state7, noise, frame=0, score=0.9):
    return Detection(
        frame=frame, class_label="car", state=np.asarray(state7, float),
        cov=np.diag(noise.classes["car"].det_var), score=score,
    )


def make_detection(state7, cov=None, frame=0, score=0.9):
    if cov is None:
        cov = 0.04 * np.eye(7)
    return Detection(
        frame=frame, class_label="car", state=np.asarray(state7, float),
        cov=cov, score=score,
    )


def make_track(mean10, cov=None):
    if cov is None:
        cov = np.eye(10) * 0.05
    return TrackState(np.asarray(mean10, float), cov)


class TestHeadingPenalty:
    def test_aligned_is_one(self):
        for mode in HeadingMode:
            assert heading_penalty(0.7, 0.7, mode) == pytest.approx(1.0)

    def test_opposite_flip_forgives(self):
        # a 180-degree flip is treated as the same physical box
        assert heading_penalty(np.pi, 0.0, HeadingMode.FLIP) == pytest.approx(1.0)

    def test_opposite_full_maximal(self):
        assert heading_penalty(np.pi, 0.0, HeadingMode.FULL) == pytest.approx(3.0)

    def test_perpendicular_is_two(self):
        for mode in HeadingMode:
            assert heading_penalty(np.pi / 2, 0.0, mode) == pytest.approx(2.0)

    def test_flip_range(self):
        grid = np.linspace(-np.pi, np.pi, 721)
        vals = [heading_penalty(g, 0.0, HeadingMode.FLIP) for g in grid]
        assert 1.0 <= min(vals) and max(vals) <= 2.0 + 1e-12

    def test_full_range(self):
        grid = np.linspace(-np.pi, np.pi, 721)
        vals = [heading_penalty(g, 0.0, HeadingMode.FULL) for g in grid]
        assert 1.0 <= min(vals) and max(vals) <= 3.0 + 1e-12

    def test_residual_wraps_2pi(self):
        r = wrap_heading_residual(2 * np.pi + 0.1, 0.0, HeadingMode.FULL)
        assert r == pytest.approx(0.1)


class TestMeanCovariance:
    def test_hand_example(self):
        cov = np.diag([1, 2, 3, 100, 4, 5, 6, 9, 9, 9]).astype(float)
        t = make_track(np.zeros(10), cov)
        # heading (100) and velocity (9s) are excluded: (1+2+3+4+5+6)/6
        assert mean_covariance(t) == pytest.approx(3.5)

    def test_grows_under_prediction(self):
        noise = make_noise()
        t = init_track(make_detection([0, 0, 0, 0, 4, 2, 1.5]), noise)
        prev = mean_covariance(t)
        for _ in range(10):
            t = predict(t, noise, "car")
            cur = mean_covariance(t)
            assert cur > prev
            prev = cur


class TestModifiedDivergence:
    def test_matches_direct_js(self):
        det = make_detection([1.0, 2.0, 0.0, 0.3, 4, 2, 1.5])
        t = make_track([1.5, 2.2, 0.0, 0.1, 4.1, 2.0, 1.4, 0, 0, 0])
        proj = project_track(t)
        expected = js_divergence(
            GaussianNd(det.state, det.cov), proj
        ) * (2.0 - math.cos(0.2))
        got = modified_divergence(det, t, HeadingMode.FULL)
        assert got == pytest.approx(expected, rel=1e-9)

    def test_symmetric_in_position_offset(self):
        det_a = make_detection([1.0, 0, 0, 0, 4, 2, 1.5])
        det_b = make_detection([-1.0, 0, 0, 0, 4, 2, 1.5])
        t = make_track([0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0])
        assert modified_divergence(det_a, t, HeadingMode.FLIP) == pytest.approx(
            modified_divergence(det_b, t, HeadingMode.FLIP)
        )

    def test_pi_flip_no_spurious_divergence(self):
        # identical boxes, heading reported pi apart: in flip mode the
        # divergence term must vanish (penalty 1, aligned representative)
        det = make_detection([0, 0, 0, np.pi, 4, 2, 1.5], cov=0.05 * np.eye(7))
        t = make_track([0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0], np.eye(10) * 0.05)
        assert modified_divergence(det, t, HeadingMode.FLIP) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_farther_is_costlier(self):
        t = make_track([0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0])
        prev = -1.0
        for dx in (0.0, 0.5, 1.0, 2.0, 4.0):
            det = make_detection([dx, 0, 0, 0, 4, 2, 1.5])
            cur = modified_divergence(det, t, HeadingMode.FLIP)
            assert cur > prev
            prev = cur


class TestGuidedCost:
    def test_is_scaled_modified(self):
        cfg = CostConfig(HeadingMode.FLIP, 1.0, CostKind.GUIDED)
        det = make_detection([0.5, 0.2, 0, 0.1, 4, 2, 1.5])
        t = make_track([0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0])
        assert guided_cost(det, t, cfg) == pytest.approx(
            modified_divergence(det, t, HeadingMode.FLIP) * mean_covariance(t)
        )

    def test_uncertain_track_priced_out(self):
        """The core guidance effect on a fixed detection.

        A track that has coasted accumulates covariance; its divergence
        to a nearby detection falls (flatter distribution) but the mean
        covariance factor rises faster, so the scaled cost ranks the
        fresh track first.
        """
        cfg = shipped_config()
        noise = cfg.noise
        det0 = shipped_detection([0, 0, 0, 0, 4, 2, 1.5], noise)
        fresh = update(
            predict(init_track(det0, noise), noise, "car"), det0, noise
        )
        stale = fresh
        for _ in range(6):
            stale = predict(stale, noise, "car")
        det = shipped_detection([2.0, 0, 0, 0, 4, 2, 1.5], noise)
        assert modified_divergence(det, stale, HeadingMode.FLIP) < (
            modified_divergence(det, fresh, HeadingMode.FLIP)
        )
        assert guided_cost(det, stale, cfg.cost) > guided_cost(
            det, fresh, cfg.cost
        )

    def test_divergence_trend_under_prediction(self):
        # converge a track, then accumulate predictions; at a fixed 2 m
        # offset the unscaled divergence must not rise while the
        # covariance factor must strictly rise
        noise = shipped_config().noise
        det0 = shipped_detection([0, 0, 0, 0, 4, 2, 1.5], noise)
        t = init_track(det0, noise)
        for _ in range(5):
            t = update(predict(t, noise, "car"), det0, noise)
        det = shipped_detection([2.0, 0, 0, 0, 4, 2, 1.5], noise)
        last_div = np.inf
        last_mc = 0.0
        for _k in range(10):
            t = predict(t, noise, "car")
            div = modified_divergence(det, t, HeadingMode.FLIP)
            mc = mean_covariance(t)
            assert div <= last_div + 1e-12
            assert mc > last_mc
            last_div, last_mc = div, mc


class TestMahalanobis:
    def test_hand_value(self):
        noise = make_noise(r=0.04)
        cov10 = np.eye(10) * 0.05
        t = TrackState(np.zeros(10) + [0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0][0:10], cov10)
        mean = np.array([0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0], float)
        t = TrackState(mean, cov10)
        det = make_detection([0.3, 0, 0, 0, 4, 2, 1.5])
        # every observed axis has S = 0.05 + 0.04
        expected = math.sqrt(0.3**2 / 0.09)
        assert mahalanobis_cost(det, t, noise) == pytest.approx(expected, rel=1e-9)

    def test_heading_wrap(self):
        noise = make_noise()
        mean = np.array([0, 0, 0, np.pi - 0.01, 4, 2, 1.5, 0, 0, 0], float)
        t = TrackState(mean, np.eye(10) * 0.05)
        det = make_detection([0, 0, 0, -np.pi + 0.01, 4, 2, 1.5])
        expected = math.sqrt(0.02**2 / 0.09)
        assert mahalanobis_cost(det, t, noise) == pytest.approx(expected, rel=1e-6)


class TestPairCostDispatch:
    def test_kinds(self):
        noise = make_noise()
        det = make_detection([0.4, 0, 0, 0, 4, 2, 1.5])
        t = make_track([0, 0, 0, 0, 4, 2, 1.5, 0, 0, 0])
        for kind, ref in (
            (CostKind.GUIDED, guided_cost(det, t, CostConfig(HeadingMode.FLIP, 1.0, CostKind.GUIDED))),
            (CostKind.MODIFIED, modified_divergence(det, t, HeadingMode.FLIP)),
            (CostKind.MAHALANOBIS, mahalanobis_cost(det, t, noise)),
        ):
            cfg = CostConfig(HeadingMode.FLIP, 1.0, kind)
            assert pair_cost(det, t, cfg, noise) == pytest.approx(ref)

    def test_bad_gate(self):
        with pytest.raises(ConfigError):
            CostConfig(HeadingMode.FLIP, 0.0, CostKind.GUIDED)
