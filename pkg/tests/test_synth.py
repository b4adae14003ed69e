import math

import numpy as np
import pytest

from maskmeasure.errors import OutOfViewError
from maskmeasure.project import CameraIntrinsics
from maskmeasure.synth import (BOTTLE_LENGTH, BOTTLE_VOLUME, GroundTruth,
                               RevolutionProfile, bottle_profile,
                               cylinder_profile, frustum_volume, perturb,
                               render)


def intr(fx=700.0, w=640, h=480):
    return CameraIntrinsics(fx=fx, fy=fx, cx=(w - 1) / 2, cy=(h - 1) / 2)


class TestProfileValidation:
    def test_heights_must_increase(self):
        with pytest.raises(ValueError):
            RevolutionProfile(heights=[0.0, 0.0], radii=[0.1, 0.1])

    def test_radii_positive(self):
        with pytest.raises(ValueError):
            RevolutionProfile(heights=[0.0, 0.1], radii=[0.1, 0.0])

    def test_distance_exceeds_radius(self):
        with pytest.raises(ValueError):
            RevolutionProfile(heights=[0.0, 0.1], radii=[0.5, 0.5],
                              distance=0.4)


class TestRender:
    def test_cylinder_projected_width(self):
        # width at the axis plane: 2 * r * fx / z
        prof = cylinder_profile(0.02, 0.5, distance=1.0, image_size=(640, 480))
        mask, depth, gt = render(prof, intr())
        ys, xs = np.nonzero(mask)
        mid = (ys.min() + ys.max()) // 2
        row = xs[ys == mid]
        width = row.max() - row.min() + 1
        assert width == pytest.approx(2 * 0.02 * 700 / 1.0, abs=2)

    def test_depth_is_front_surface(self):
        prof = cylinder_profile(0.05, 0.3, distance=1.0, image_size=(640, 480))
        mask, depth, gt = render(prof, intr())
        ys, xs = np.nonzero(mask)
        mid_y = (ys.min() + ys.max()) // 2
        row = sorted(xs[ys == mid_y])
        center_x = row[len(row) // 2]
        # on-axis pixel sees the nearest surface point, edges approach z0
        assert depth[mid_y, center_x] == pytest.approx(1.0 - 0.05, abs=2e-3)
        assert depth[mid_y, row[0]] == pytest.approx(1.0, abs=5e-3)
        assert not depth[~mask].any()

    def test_bottle_ground_truth_exact(self):
        prof = bottle_profile(distance=1.2, image_size=(640, 480))
        mask, depth, gt = render(prof, intr(fx=900))
        assert gt.length == pytest.approx(BOTTLE_LENGTH, rel=1e-12)
        assert gt.volume == pytest.approx(BOTTLE_VOLUME, rel=1e-12)
        assert gt.volume == pytest.approx(943e-6, rel=1e-12)

    def test_cone_frustum_identity(self):
        prof = RevolutionProfile(heights=[0.0, 0.3], radii=[0.04, 0.01],
                                 distance=1.0, image_size=(640, 480))
        _, _, gt = render(prof, intr())
        expected = (math.pi * 0.3 / 3) * (0.04 ** 2 + 0.04 * 0.01 + 0.01 ** 2)
        assert gt.volume == pytest.approx(expected, rel=1e-12)

    def test_out_of_view_raises(self):
        prof = cylinder_profile(0.02, 2.5, distance=1.0, image_size=(640, 480))
        with pytest.raises(OutOfViewError):
            render(prof, intr())

    def test_tilt_rotates_axis(self):
        prof = cylinder_profile(0.02, 0.4, tilt=math.radians(30),
                                distance=1.2, image_size=(640, 640))
        mask, _, gt = render(prof, intr(fx=700, w=640, h=640))
        d = gt.centerline_px[-1] - gt.centerline_px[0]
        angle = math.atan2(-d[1], d[0])  # y down; upright = +90 deg
        assert angle == pytest.approx(math.pi / 2 - math.radians(30), abs=1e-6)

    def test_axis_height_maps_centerline(self):
        prof = cylinder_profile(0.03, 0.4, tilt=0.2, distance=1.3,
                                image_size=(640, 640))
        _, _, gt = render(prof, intr(fx=800, w=640, h=640))
        top3d = gt.axis_base + gt.length * gt.axis_dir
        hs = gt.axis_height(np.array([gt.axis_base, top3d]))
        assert hs[0] == pytest.approx(0.0, abs=1e-12)
        assert hs[1] == pytest.approx(gt.length, rel=1e-12)

    def test_distortion_unsupported(self):
        cam = CameraIntrinsics(fx=700, fy=700, cx=320, cy=240,
                               dist=[-0.1, 0, 0, 0, 0])
        with pytest.raises(ValueError):
            render(cylinder_profile(0.02, 0.3), cam)


class TestPerturb:
    def test_identity(self):
        depth = np.zeros((20, 20))
        depth[5:15, 5:15] = 1.0
        out = perturb(depth, 0.0, 0)
        assert np.array_equal(out, depth)

    def test_edge_dropout_band(self):
        depth = np.zeros((30, 30))
        depth[5:25, 5:25] = 1.0
        out = perturb(depth, 0.0, 2)
        from scipy.ndimage import distance_transform_edt
        edt = distance_transform_edt(depth > 0)
        band = (depth > 0) & (edt <= 2)
        assert not out[band].any()
        assert np.array_equal(out[(depth > 0) & ~band],
                              depth[(depth > 0) & ~band])

    def test_seeded_determinism(self):
        depth = np.zeros((30, 30))
        depth[5:25, 5:25] = 1.0
        a = perturb(depth, 0.005, 2, seed=42)
        b = perturb(depth, 0.005, 2, seed=42)
        assert np.array_equal(a, b)
        c = perturb(depth, 0.005, 2, seed=43)
        assert not np.array_equal(a, c)

    def test_noise_only_on_valid(self):
        depth = np.zeros((30, 30))
        depth[5:25, 5:25] = 1.0
        out = perturb(depth, 0.01, 0, seed=1)
        assert not out[depth == 0].any()
        assert (out[depth > 0] != 1.0).any()


class TestSelfConsistency:
    def test_pipeline_recovers_unperturbed_render(self):
        # benign scale: projected radius ~45 px, so discretization stays
        # well inside the stated envelope
        from maskmeasure.mask_ops import MaskConfig
        from maskmeasure.pipeline import RunConfig, run_measure
        from maskmeasure.segments import SamplingConfig
        cam = CameraIntrinsics(fx=2700, fy=2700, cx=319.5, cy=319.5)
        prof = cylinder_profile(0.02, 0.25, tilt=0.06, distance=1.2,
                                image_size=(640, 640), center=(0.001, 0.002))
        mask, depth, gt = render(prof, cam)
        cfg = RunConfig(mask=MaskConfig(rdp_epsilon=1.0),
                        sampling=SamplingConfig(march_step=0.25))
        rep = run_measure(mask, depth, cam, cfg).report
        h = gt.axis_height(rep.midpoints3d)
        dtrue = gt.diameter_at(h)
        err = np.abs(rep.diameters - dtrue) / dtrue
        assert np.quantile(err, 0.95) < 0.02
        assert abs(rep.length - gt.length) / gt.length < 0.02
        assert abs(rep.volume - gt.volume) / gt.volume < 0.05


class TestFrustumVolume:
    def test_cylinder(self):
        assert frustum_volume([0, 1.0], [0.1, 0.1]) == pytest.approx(
            math.pi * 0.01)

    def test_additivity(self):
        a = frustum_volume([0, 0.5, 1.0], [0.1, 0.07, 0.02])
        b = (frustum_volume([0, 0.5], [0.1, 0.07])
             + frustum_volume([0.5, 1.0], [0.07, 0.02]))
        assert a == pytest.approx(b, rel=1e-15)


class TestGroundTruthIO:
    def test_to_json(self, tmp_path):
        prof = bottle_profile(distance=1.2, image_size=(640, 480))
        _, _, gt = render(prof, intr(fx=900))
        path = tmp_path / "gt.json"
        gt.to_json(path)
        import json
        data = json.loads(path.read_text())
        assert data["length_m"] == pytest.approx(BOTTLE_LENGTH)
        assert data["volume_ml"] == pytest.approx(943.0)
        assert len(data["centerline_px"]) == 256
