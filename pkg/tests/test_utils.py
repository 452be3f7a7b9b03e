import pytest
import tempfile
import os
import numpy as np
import plrtest
import plrtest.utils as utils
from unittest.mock import patch


class TestResultStore:
    """Test the abstract ResultStore class."""

    def test_abstract_methods(self):
        """ResultStore cannot be instantiated directly."""
        with pytest.raises(TypeError):
            utils.ResultStore()

    def test_dict_interface_saves_on_mutation(self):
        """Every mutation calls save."""
        class CountingStore(utils.ResultStore):
            saves = 0
            def load(self): pass
            def save(self): self.saves += 1

        store = CountingStore()
        store['cell'] = {'rejections': 3}
        assert store['cell'] == {'rejections': 3}
        assert 'cell' in store
        assert len(store) == 1
        assert list(store.keys()) == ['cell']
        assert list(store.items()) == [('cell', {'rejections': 3})]
        del store['cell']
        store.clear()
        assert store.saves == 3
        assert store.get('missing', 7) == 7


class TestDiskStore:
    """Test DiskStore persistence."""

    def test_roundtrip(self):
        """A second store on the same path sees the first one's cells."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'cells', 'run.pkl')
            store = utils.DiskStore(path)
            store['1|0.3|125|ks'] = {'trials': 200, 'rejections': 150}
            again = utils.DiskStore(path)
            assert again['1|0.3|125|ks']['rejections'] == 150

    def test_nonexistent_file(self):
        """Loading a missing file gives an empty store."""
        with tempfile.TemporaryDirectory() as tmpdir:
            store = utils.DiskStore(os.path.join(tmpdir, 'none.pkl'))
            assert len(store) == 0

    def test_corrupt_file_is_ignored(self):
        """A truncated pickle starts an empty store."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'bad.pkl')
            with open(path, 'wb') as f:
                f.write(b'')
            assert len(utils.DiskStore(path)) == 0

    def test_no_temp_file_left(self):
        """Saving swaps the temp file into place."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'run.pkl')
            utils.DiskStore(path)['a'] = 1
            assert os.listdir(tmpdir) == ['run.pkl']


class TestCompressedStore:
    """Test CompressedStore functionality."""

    def test_compressed_roundtrip(self):
        """Compressed cells load back unchanged."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'run.zst')
            store = utils.CompressedStore(path)
            store['rates'] = [0.05] * 500
            assert utils.CompressedStore(path)['rates'] == [0.05] * 500
            assert os.path.getsize(path) < 500 * 8

    def test_compression_level(self):
        """Custom compression level is kept."""
        with tempfile.TemporaryDirectory() as tmpdir:
            store = utils.CompressedStore(os.path.join(tmpdir, 'x.zst'), compression_level=10)
            assert store.compression_level == 10

    def test_plain_pickle_is_not_accepted(self):
        """An uncompressed pickle is treated as unreadable."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, 'plain.pkl')
            utils.DiskStore(path)['a'] = 1
            assert len(utils.CompressedStore(path)) == 0


class TestStreams:
    """Test seeded random streams and worker settings."""

    def test_same_key_same_stream(self):
        """Equal (seed, keys) give equal draws."""
        a = utils.make_rng(7, 3).random(5)
        b = utils.make_rng(7, 3).random(5)
        np.testing.assert_array_equal(a, b)

    def test_different_keys_differ(self):
        """Different replicate keys give different draws."""
        assert not np.array_equal(utils.make_rng(7, 3).random(5), utils.make_rng(7, 4).random(5))

    def test_derive_seed_is_stable(self):
        """Derived seeds are plain ints and reproducible."""
        s = utils.derive_seed(1, 2, 3)
        assert isinstance(s, int)
        assert s == utils.derive_seed(1, 2, 3)

    def test_negative_seed_rejected(self):
        """Negative seeds are refused."""
        with pytest.raises(ValueError):
            utils.make_rng(-1)

    def test_worker_count(self):
        """PLR_THREADS caps workers; junk falls back to the default."""
        with patch.dict(os.environ, {'PLR_THREADS': '4'}):
            assert utils.worker_count() == 4
        with patch.dict(os.environ, {'PLR_THREADS': 'many'}):
            assert utils.worker_count() == 1
        with patch.dict(os.environ, {}, clear=True):
            assert utils.worker_count(default=2) == 2


class TestDebugPrint:
    """Test the debug flag."""

    def test_silent_by_default(self, capsys):
        utils._debug_print("hidden")
        assert capsys.readouterr().out == ""

    def test_prints_when_enabled(self, capsys):
        with patch.object(plrtest, 'debug', True):
            utils._debug_print("shown")
        assert "shown" in capsys.readouterr().out


if __name__ == "__main__":
    pytest.main([__file__])
