import numpy as np
import pytest

from processing.grid import Field
from tools.snapshot_io import HEADER, read_snapshot, write_snapshot


class TestSnapshots:
    def test_layout(self, grid, rng, tmp_path):
        f = Field(grid, rng.standard_normal(grid.shape), t=0.25)
        path = write_snapshot(tmp_path / "u_000001.bin", f)
        raw = path.read_bytes()
        assert HEADER.size == 40
        assert raw[:4] == b"BLGV"
        assert len(raw) == 40 + 8 * grid.N_x * grid.N_y
        assert np.frombuffer(raw, dtype="<f8", offset=40)[1] == f.values[0, 1]

    def test_read_back_on_given_grid(self, stretched_grid, rng, tmp_path):
        f = Field(stretched_grid, rng.standard_normal(stretched_grid.shape), t=1.5)
        g = read_snapshot(write_snapshot(tmp_path / "theta.bin", f), stretched_grid)
        np.testing.assert_array_equal(g.values, f.values)
        assert g.t == 1.5
        assert g.grid is stretched_grid

    def test_header_rebuilds_uniform_grid(self, grid, tmp_path):
        f = grid.from_function(lambda X, Y: np.sin(X) * np.exp(-Y))
        g = read_snapshot(write_snapshot(tmp_path / "u.bin", f))
        assert g.grid.shape == grid.shape
        assert g.grid.L_x == grid.L_x and g.grid.Y_max == grid.Y_max

    def test_creates_parent_directories(self, grid, tmp_path):
        path = write_snapshot(tmp_path / "snapshots" / "u.bin", grid.zeros())
        assert path.exists()

    @pytest.mark.parametrize("damage", ["magic", "truncate", "short"])
    def test_damaged_files_rejected(self, grid, tmp_path, damage):
        path = write_snapshot(tmp_path / "u.bin", grid.zeros())
        raw = path.read_bytes()
        if damage == "magic":
            raw = b"XXXX" + raw[4:]
        elif damage == "truncate":
            raw = raw[:-8]
        else:
            raw = raw[:10]
        path.write_bytes(raw)
        with pytest.raises(ValueError):
            read_snapshot(path)

    def test_grid_mismatch_rejected(self, grid, tmp_path):
        from processing.grid import Grid

        path = write_snapshot(tmp_path / "u.bin", grid.zeros())
        with pytest.raises(ValueError):
            read_snapshot(path, Grid(L_x=grid.L_x, N_x=32, Y_max=10.0, N_y=64))
