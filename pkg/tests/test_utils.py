"""통계 / 렌더링 / 글리프 / 차트 유틸리티"""

import math

import numpy as np
import pytest

from concept_xai.utils import charts, statistics
from concept_xai.utils.charts import grouped_bar_chart, line_chart, percent_labels
from concept_xai.utils.glyphs import glyph_mask
from concept_xai.utils.rendering import apply_colormap, blend_overlay, read_png, render_overlay, upsample_map, write_png


class TestStatistics:
    def test_contraharmonic_mean(self):
        assert statistics.contraharmonic_mean(np.array([1.0, 2.0, 3.0])) == pytest.approx(14.0 / 6.0)
        assert statistics.contraharmonic_mean(np.zeros(4)) == 0.0

    def test_median(self):
        assert statistics.median([3.0, 1.0, 2.0]) == 2.0
        assert statistics.median([1.0, 2.0, 3.0, 4.0]) == 2.5
        with pytest.raises(ValueError):
            statistics.median([])

    def test_mean_and_std_population(self):
        mean, std = statistics.mean_and_std([1.0, 3.0])
        assert mean == 2.0
        assert std == 1.0
        with pytest.raises(ValueError):
            statistics.mean_and_std([])

    def test_spearman(self):
        rho, p_value = statistics.spearman([0.0, 0.25, 0.5, 1.0], [0.1, 0.2, 0.4, 0.9])
        assert rho == pytest.approx(1.0)
        assert p_value is not None
        assert statistics.spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == (None, None)
        assert statistics.spearman([1.0], [2.0]) == (None, None)
        with pytest.raises(ValueError):
            statistics.spearman([1.0, 2.0], [1.0])

    def test_ttest(self):
        t_stat, p_value = statistics.two_sample_ttest([0.9, 0.95, 1.0, 0.92], [0.4, 0.5, 0.55, 0.45])
        assert t_stat > 0
        assert p_value < 0.05
        assert statistics.two_sample_ttest([0.5, 0.5], [0.5, 0.5]) == (0.0, 1.0)
        with pytest.raises(ValueError):
            statistics.two_sample_ttest([1.0], [1.0, 2.0])

    def test_monotonic_helpers(self):
        assert statistics.count_increases([0.9, 0.7, 0.8, 0.6, 0.65]) == (2, pytest.approx(0.1))
        assert statistics.is_non_increasing([0.9, 0.8, 0.81, 0.5])
        assert not statistics.is_non_increasing([0.9, 0.8, 0.9, 0.5])
        assert not statistics.is_non_increasing([0.9, 0.91, 0.92, 0.5])
        assert statistics.variance([]) == 0.0
        assert statistics.variance([0.0, 1.0]) == 0.25


class TestRendering:
    def test_upsample_keeps_constant_map(self):
        out = upsample_map(np.full((4, 4), 0.3), (16, 16))
        assert out.shape == (16, 16)
        np.testing.assert_allclose(out, 0.3)

    def test_upsample_odd_ratio_shape(self):
        assert upsample_map(np.arange(9.0).reshape(3, 3), (10, 7)).shape == (10, 7)

    def test_colormap_is_ordered(self):
        colors = apply_colormap(np.array([[0.0, 1.0]]))
        assert colors.shape == (1, 2, 3)
        # viridis: 낮은 값은 어두운 보라, 높은 값은 밝은 노랑
        assert colors[0, 1].sum() > colors[0, 0].sum()

    def test_blend_extremes(self, rng):
        image = rng.uniform(size=(8, 8, 3))
        mask = rng.uniform(size=(2, 2))
        np.testing.assert_allclose(blend_overlay(image, mask, alpha=0.0), image)
        full = blend_overlay(image, mask, alpha=1.0)
        assert full.min() >= 0.0 and full.max() <= 1.0
        with pytest.raises(ValueError):
            blend_overlay(image, mask, alpha=1.5)

    def test_png_roundtrip_is_exact_for_quantized_images(self, rng, tmp_path):
        image = rng.integers(0, 256, size=(5, 7, 3)) / 255.0
        loaded = read_png(write_png(tmp_path / "x.png", image))
        np.testing.assert_array_equal(loaded, image)

    def test_render_overlay_writes_file(self, rng, tmp_path):
        path = tmp_path / "overlays" / "o.png"
        blended = render_overlay(rng.uniform(size=(8, 8, 3)), np.ones((4, 4)), output_path=path)
        assert path.exists()
        assert read_png(path).shape == blended.shape


class TestGlyphs:
    @pytest.mark.parametrize("letter", ["Z", "T", "C"])
    def test_glyph_scales(self, letter):
        mask = glyph_mask(letter, 14, 10)
        assert mask.shape == (14, 10)
        assert mask.any() and not mask.all()

    def test_letters_differ(self):
        masks = [glyph_mask(letter, 7, 5) for letter in "ZTC"]
        assert not np.array_equal(masks[0], masks[1])
        assert not np.array_equal(masks[1], masks[2])

    def test_unknown_letter(self):
        with pytest.raises(ValueError):
            glyph_mask("Q", 7, 5)


class TestCharts:
    def test_charts_are_written_reproducibly(self, tmp_path):
        first = grouped_bar_chart(
            tmp_path / "a.png", ["conv1", "conv2"], {"c": [0.2, 0.4], "d": [0.1, 0.0]}, markers={"d": [False, True]}
        )
        second = grouped_bar_chart(
            tmp_path / "b.png", ["conv1", "conv2"], {"c": [0.2, 0.4], "d": [0.1, 0.0]}, markers={"d": [False, True]}
        )
        assert first.read_bytes() == second.read_bytes()
        assert line_chart(tmp_path / "l.png", [0.0, 0.5, 1.0], {"acc": {0.0: 0.9, 0.5: math.nan, 1.0: 0.3}}).exists()

    def test_line_chart_keeps_values_at_their_fraction(self, tmp_path, monkeypatch):
        captured = {}

        def keep_figure(fig, path):
            captured["fig"] = fig
            return tmp_path / "unused.png"

        monkeypatch.setattr(charts, "_save", keep_figure)
        line_chart(tmp_path / "gap.png", [0.0, 0.5, 1.0], {"attr": {0.0: 0.2, 1.0: 0.8}})
        (line,) = captured["fig"].axes[0].lines
        assert list(line.get_xdata()) == [0.0, 1.0]
        assert list(line.get_ydata()) == [0.2, 0.8]

    def test_chart_requires_series(self, tmp_path):
        with pytest.raises(ValueError):
            grouped_bar_chart(tmp_path / "x.png", ["a"], {})

    def test_percent_labels(self):
        assert percent_labels([0.0, 0.25, 1.0]) == ["0%", "25%", "100%"]
