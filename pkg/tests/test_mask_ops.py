import numpy as np
import pytest
from scipy.ndimage import label

from maskmeasure.errors import EmptyMaskError
from maskmeasure.mask_ops import (MaskConfig, count_components, has_holes,
                                  largest_component, open_close,
                                  polygonal_refine, refine,
                                  remove_small_objects)


def blob(shape, y, x, h, w):
    m = np.zeros(shape, bool)
    m[y:y + h, x:x + w] = True
    return m


def component_areas(mask):
    """Flood-fill oracle: label with full (8-)connectivity, count areas."""
    labels, n = label(mask, structure=np.ones((3, 3)))
    return sorted(labels[labels > 0].tolist().count(k) for k in range(1, n + 1))


class TestRemoveSmallObjects:
    def test_speck_removed_blob_kept(self):
        m = blob((60, 60), 5, 5, 25, 20)   # 500 px
        m[50, 50] = m[50, 51] = m[51, 50] = True  # 3 px speck
        out = remove_small_objects(m, 10)
        assert out[10, 10]
        assert not out[50, 50]
        assert out.sum() == 500

    def test_empty_stays_empty(self):
        m = np.zeros((20, 20), bool)
        assert not remove_small_objects(m, 10).any()

    def test_threshold_between_two_blobs(self):
        m = blob((40, 40), 2, 2, 4, 5) | blob((40, 40), 20, 20, 5, 5)  # 20, 25
        out = remove_small_objects(m, 22)
        assert component_areas(out) == [25]

    def test_surviving_pixels_unchanged(self):
        rng = np.random.default_rng(0)
        m = rng.random((50, 50)) > 0.7
        out = remove_small_objects(m, 5)
        assert not (out & ~m).any()  # never adds pixels


class TestLargestComponent:
    def test_keeps_largest(self):
        m = blob((40, 40), 2, 2, 10, 10) | blob((40, 40), 25, 25, 5, 8)
        out = largest_component(m)
        assert component_areas(out) == [100]

    def test_single_blob_identity(self):
        m = blob((30, 30), 5, 5, 7, 9)
        assert np.array_equal(largest_component(m), m)

    def test_equal_area_tie_break(self):
        # two 50-px blobs; the one with the lexicographically smaller
        # topmost-leftmost pixel must win
        a = blob((40, 40), 3, 10, 5, 10)
        b = blob((40, 40), 20, 2, 5, 10)
        out = largest_component(a | b)
        assert np.array_equal(out, a)

    def test_output_subset_of_input(self):
        rng = np.random.default_rng(1)
        m = rng.random((40, 40)) > 0.6
        out = largest_component(m)
        assert not (out & ~m).any()

    def test_empty_input(self):
        assert not largest_component(np.zeros((10, 10), bool)).any()


class TestOpenClose:
    def test_solid_square_stable(self):
        m = blob((31, 31), 5, 5, 21, 21)
        assert np.array_equal(open_close(m, 3), m)

    def test_single_pixel_hole_filled(self):
        # erosion widens the hole, dilation restores it, closing fills it
        m = blob((31, 31), 5, 5, 21, 21)
        m[15, 15] = False
        out = open_close(m, 3)
        assert out[15, 15]
        assert np.array_equal(out, blob((31, 31), 5, 5, 21, 21))

    def test_protrusion_removed(self):
        m = blob((31, 31), 5, 5, 21, 21)
        m[3, 15] = m[4, 15] = True  # 1-px-wide bump on the top edge
        out = open_close(m, 3)
        assert not out[3, 15] and not out[4, 15]
        assert np.array_equal(out, blob((31, 31), 5, 5, 21, 21))

    def test_border_counts_as_background(self):
        # a 2-px strip on the image edge erodes away entirely under the
        # out-of-image-is-background policy (the default cv2 border would
        # keep its outer column)
        m = np.zeros((12, 12), bool)
        m[:, 0:2] = True
        out = open_close(m, 3)
        assert not out.any()

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            open_close(np.ones((5, 5), bool), 4)


class TestPolygonalRefine:
    def test_rectangle_identity(self):
        m = blob((40, 40), 10, 5, 20, 20)
        assert np.array_equal(polygonal_refine(m, 1.0), m)

    def test_jittered_rectangle_smoothed(self):
        clean = blob((60, 60), 10, 10, 30, 30)
        rng = np.random.default_rng(2)
        jittered = clean.copy()
        for x in range(10, 40):  # 1-px boundary jitter on the top edge
            if rng.random() < 0.5:
                jittered[9, x] = True
        out = polygonal_refine(jittered, 2.0)
        assert abs(int(out.sum()) - int(clean.sum())) / clean.sum() < 0.05

    def test_disk_area_close_to_analytic(self):
        yy, xx = np.mgrid[0:80, 0:80]
        disk = (xx - 40.0) ** 2 + (yy - 40.0) ** 2 <= 30.0 ** 2
        out = polygonal_refine(disk, 0.5)
        assert abs(out.sum() - np.pi * 30 ** 2) / (np.pi * 30 ** 2) < 0.02

    def test_fills_interior_holes(self):
        m = blob((40, 40), 5, 5, 25, 25)
        m[12:18, 12:18] = False
        out = polygonal_refine(m, 1.0)
        assert not has_holes(out)
        assert out[14, 14]

    def test_empty_raises(self):
        with pytest.raises(EmptyMaskError):
            polygonal_refine(np.zeros((10, 10), bool), 1.0)


class TestRefine:
    def make_messy(self):
        m = blob((80, 80), 10, 10, 50, 30)
        m[30:34, 25:29] = False          # hole
        m[5, 70] = True                  # speck
        m[70:72, 60:64] = True           # small patch
        return m

    def test_messy_mask_cleaned(self):
        out = refine(self.make_messy(), MaskConfig())
        assert count_components(out) == 1
        assert not has_holes(out)

    def test_clean_rectangle_roughly_unchanged(self):
        m = blob((60, 60), 10, 10, 40, 30)
        out = refine(m, MaskConfig())
        assert abs(int(out.sum()) - int(m.sum())) / m.sum() < 0.05

    def test_all_false_raises(self):
        with pytest.raises(EmptyMaskError):
            refine(np.zeros((30, 30), bool), MaskConfig())

    def test_idempotent_up_to_boundary(self):
        once = refine(self.make_messy(), MaskConfig())
        twice = refine(once, MaskConfig())
        assert count_components(twice) == 1
        assert abs(int(twice.sum()) - int(once.sum())) / once.sum() < 0.01

    def test_background_reachable_from_border(self):
        out = refine(self.make_messy(), MaskConfig())
        assert not has_holes(out)

    def test_area_preserved_for_convex_shapes(self):
        # shapes large relative to rdp_epsilon, as the default config targets
        yy, xx = np.mgrid[0:90, 0:90]
        disk = (xx - 45.0) ** 2 + (yy - 45.0) ** 2 <= 35.0 ** 2
        for m in (blob((60, 60), 5, 5, 40, 40), disk):
            out = refine(m, MaskConfig())
            assert abs(int(out.sum()) - int(m.sum())) / m.sum() <= 0.05


class TestMaskConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            MaskConfig(min_object_size=0)
        with pytest.raises(ValueError):
            MaskConfig(kernel_size=4)
        with pytest.raises(ValueError):
            MaskConfig(rdp_epsilon=-1)
