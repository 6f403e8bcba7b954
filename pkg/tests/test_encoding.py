import numpy as np
import pytest

from searchsim.encoding import (
    CHANNEL_NAMES,
    VARIANTS,
    EncoderConfig,
    VisitMap,
    apply_variant,
    boundary_channel,
    build_encoding,
    density_channel,
    denormalize_label,
    encoding_to_input,
    gaussian_kernel,
    normalize_label,
    position_channel,
    raw_intensity,
    visit_channel,
    visit_update,
)
from searchsim.phd import ParticleSet
from searchsim.world import Environment, GridSpec

ENV = Environment()
GRID = GridSpec()


class TestVisitMap:
    def test_first_entry_counts(self):
        vmap = VisitMap.fresh(GRID)
        visit_update(vmap, (15.0, 15.0), GRID)  # cell (2, 2)
        assert vmap.counts[1, 1] == 1

    def test_staying_counts_once(self):
        vmap = VisitMap.fresh(GRID)
        for _ in range(10):
            visit_update(vmap, (15.0, 15.0), GRID)
        assert vmap.counts[1, 1] == 1
        assert vmap.counts.sum() == 1

    def test_reentry_counts_again(self):
        vmap = VisitMap.fresh(GRID)
        visit_update(vmap, (15.0, 15.0), GRID)
        visit_update(vmap, (35.0, 15.0), GRID)
        visit_update(vmap, (15.0, 15.0), GRID)
        assert vmap.counts[1, 1] == 2

    def test_counts_never_decrease(self):
        vmap = VisitMap.fresh(GRID)
        rng = np.random.default_rng(0)
        prev = vmap.counts.copy()
        for _ in range(100):
            visit_update(vmap, rng.uniform(0, 260, 2), GRID)
            assert np.all(vmap.counts >= prev)
            prev = vmap.counts.copy()


class TestVisitChannel:
    def test_values(self):
        vmap = VisitMap.fresh(GRID)
        channel = visit_channel(vmap)
        assert np.all(channel == 1.0)
        vmap.counts[3, 4] = 1
        assert visit_channel(vmap)[3, 4] == pytest.approx(0.5)
        vmap.counts[3, 4] = 3
        assert visit_channel(vmap)[3, 4] == pytest.approx(0.25)

    def test_range(self):
        vmap = VisitMap.fresh(GRID)
        vmap.counts[:] = np.random.default_rng(1).integers(0, 50, size=vmap.counts.shape)
        channel = visit_channel(vmap)
        assert np.all(channel > 0.0) and np.all(channel <= 1.0)


class TestDensityChannel:
    def test_unit_mass_interior(self):
        # single unit-weight particle well inside: unit-sum kernel preserves mass
        ps = ParticleSet(np.array([[125.0, 125.0]]), np.array([1.0]))
        channel = density_channel(ps, GRID, sigma_cells=1.0)
        assert channel.sum() == pytest.approx(1.0, abs=1e-9)

    def test_peak_at_particle_cell(self):
        ps = ParticleSet(np.array([[125.0, 125.0]]), np.array([1.0]))
        channel = density_channel(ps, GRID, sigma_cells=1.0)
        assert np.unravel_index(np.argmax(channel), channel.shape) == (12, 12)

    def test_empty(self):
        assert np.all(density_channel(ParticleSet.empty(), GRID) == 0.0)

    def test_border_leaks_mass(self):
        ps = ParticleSet(np.array([[5.0, 5.0]]), np.array([1.0]))
        channel = density_channel(ps, GRID, sigma_cells=1.0)
        assert channel.sum() < 1.0

    def test_mass_preserved_when_away_from_border(self):
        rng = np.random.default_rng(2)
        # 3 sigma = 3 cells = 30 m from each border
        pos = rng.uniform(40.0, 220.0, size=(300, 2))
        w = rng.uniform(0.0, 1.0, 300)
        ps = ParticleSet(pos, w)
        channel = density_channel(ps, GRID, sigma_cells=1.0)
        assert channel.sum() == pytest.approx(w.sum(), rel=1e-9)

    def test_kernel_unit_sum(self):
        for sigma in (0.5, 1.0, 2.3):
            assert gaussian_kernel(sigma).sum() == pytest.approx(1.0, rel=1e-12)

    def test_raw_intensity_bins_weights(self):
        ps = ParticleSet(np.array([[125.0, 125.0], [125.1, 125.2], [5.0, 250.0]]),
                         np.array([0.5, 0.25, 1.0]))
        raw = raw_intensity(ps, GRID)
        assert raw[12, 12] == pytest.approx(0.75)
        assert raw[0, 25] == pytest.approx(1.0)
        assert raw.sum() == pytest.approx(1.75)


class TestPositionAndBoundary:
    def test_position_one_hot(self):
        channel = position_channel((130.0, 130.0), GRID)
        assert channel.sum() == 1.0
        assert channel[13, 13] == 1.0  # cell (14, 14)

    def test_boundary_count(self):
        channel = boundary_channel(GRID, thickness=2)
        assert int(channel.sum()) == 26 * 26 - 22 * 22  # 192

    def test_boundary_cells(self):
        channel = boundary_channel(GRID, thickness=2)
        assert channel[0, 12] == 1.0   # cell (1, 13)
        assert channel[12, 12] == 0.0  # cell (13, 13)

    def test_boundary_thickness_one(self):
        channel = boundary_channel(GRID, thickness=1)
        assert int(channel.sum()) == 26 * 26 - 24 * 24


class TestLabels:
    def test_center(self):
        assert np.allclose(normalize_label((130.0, 130.0), ENV), [0.5, 0.5])

    def test_origin(self):
        assert np.allclose(normalize_label((0.0, 0.0), ENV), [0.0, 0.0])

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = rng.uniform(0, 260, 2)
            back = denormalize_label(normalize_label(p, ENV), ENV)
            assert np.allclose(back, p, atol=1e-12)


class TestBuildEncoding:
    def _state(self):
        rng = np.random.default_rng(4)
        ps = ParticleSet(rng.uniform(0, 260, (500, 2)), rng.uniform(0, 1, 500))
        vmap = VisitMap.fresh(GRID)
        visit_update(vmap, (10.0, 10.0), GRID)
        return ps, vmap

    def test_full_shape_and_channels(self):
        ps, vmap = self._state()
        enc = build_encoding(ps, (10.0, 10.0), vmap, GRID)
        assert enc.shape == (26, 26, 4)
        assert enc[:, :, 2].sum() == 1.0
        assert set(np.unique(enc[:, :, 3])) <= {0.0, 1.0}

    def test_variants_preserve_shape(self):
        ps, vmap = self._state()
        for variant in VARIANTS:
            enc = build_encoding(ps, (10.0, 10.0), vmap, GRID, variant=variant)
            assert enc.shape == (26, 26, 4)

    def test_zeroed_channels(self):
        ps, vmap = self._state()
        for variant, channel in (("no_visit", 0), ("no_pos", 2), ("no_bound", 3)):
            enc = build_encoding(ps, (10.0, 10.0), vmap, GRID, variant=variant)
            assert np.all(enc[:, :, channel] == 0.0)

    def test_no_smooth_uses_raw(self):
        ps, vmap = self._state()
        enc = build_encoding(ps, (10.0, 10.0), vmap, GRID, variant="no_smooth")
        assert np.array_equal(enc[:, :, 1], raw_intensity(ps, GRID))

    def test_unknown_variant_rejected(self):
        ps, vmap = self._state()
        with pytest.raises(ValueError):
            build_encoding(ps, (10.0, 10.0), vmap, GRID, variant="bogus")

    def test_apply_variant_matches_direct_build(self):
        ps, vmap = self._state()
        stored = build_encoding(ps, (10.0, 10.0), vmap, GRID, variant="no_smooth")
        for variant in VARIANTS:
            direct = build_encoding(ps, (10.0, 10.0), vmap, GRID, variant=variant)
            derived = apply_variant(stored, variant)
            assert np.allclose(derived, direct, atol=1e-12), variant

    def test_encoding_to_input_layout(self):
        ps, vmap = self._state()
        enc = build_encoding(ps, (10.0, 10.0), vmap, GRID)
        x = encoding_to_input(enc)
        assert x.shape == (4, 26, 26)
        for c in range(4):
            assert np.array_equal(x[c], enc[:, :, c])
