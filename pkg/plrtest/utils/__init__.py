from abc import ABC, abstractmethod
import pickle
import zstd
import os

import numpy as np


def _debug_print(*args, **kwargs):
    """Debug print that checks the parent module's debug flag"""
    try:
        import plrtest
        if plrtest.debug:
            print(*args, **kwargs)
    except (ImportError, AttributeError):
        # Silently fail if debug flag is not available
        pass


def seed_sequence(seed, *keys):
    """SeedSequence for the stream identified by (seed, *keys)."""
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError(f"Seeds and stream keys must be non-negative, got {entropy}")
    return np.random.SeedSequence(entropy)


def make_rng(seed, *keys):
    """Counter-based generator owning the stream (seed, *keys).

    Streams with different keys are independent, so replicates can run in any
    order or concurrently and still draw the same numbers.
    """
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


def derive_seed(seed, *keys):
    """Integer seed for the child stream (seed, *keys)."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint32)[0])


def worker_count(default=1):
    """Worker cap from PLR_THREADS."""
    raw = os.environ.get("PLR_THREADS")
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        _debug_print(f"Ignoring non-integer PLR_THREADS={raw!r}")
        return default
    return max(1, value)


class ResultStore(ABC):
    """Abstract dict-like store that persists on every mutation."""

    def __init__(self, default_value=None):
        self._data = default_value if default_value is not None else {}

    @abstractmethod
    def load(self):
        """Load data from storage"""
        pass

    @abstractmethod
    def save(self):
        """Save data to storage"""
        pass

    def __getitem__(self, key):
        return self._data[key]

    def __setitem__(self, key, value):
        self._data[key] = value
        self.save()

    def __delitem__(self, key):
        del self._data[key]
        self.save()

    def __contains__(self, key):
        return key in self._data

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def keys(self):
        return self._data.keys()

    def items(self):
        return self._data.items()

    def get(self, key, default=None):
        return self._data.get(key, default)

    def clear(self):
        self._data.clear()
        self.save()


class DiskStore(ResultStore):
    """
    A store that mirrors its state to a pickle file and loads it on creation.
    Used to checkpoint finished simulation cells.
    """

    def __init__(self, path, default_value=None):
        self.path = os.fspath(path)
        super().__init__(default_value)
        self.load()

    def load(self):
        """Load data from disk"""
        try:
            with open(self.path, 'rb') as f:
                self._data = self._deserialize(f.read())
        except (FileNotFoundError, EOFError, pickle.UnpicklingError):
            self._data = {}

    def save(self):
        """Write data to a sibling temp file, then swap it in"""
        parent = os.path.dirname(self.path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        tmp = self.path + ".tmp"
        with open(tmp, 'wb') as f:
            f.write(self._serialize(self._data))
        os.replace(tmp, self.path)

    def _serialize(self, data):
        """Serialize data - can be overridden by subclasses"""
        return pickle.dumps(data)

    def _deserialize(self, data):
        """Deserialize data - can be overridden by subclasses"""
        return pickle.loads(data)

    def __repr__(self):
        return f"{type(self).__name__}(path='{self.path}', cells={len(self._data)})"


class CompressedStore(DiskStore):
    """
    A DiskStore that compresses its pickle with zstd.
    """

    def __init__(self, path, default_value=None, compression_level=5):
        self.compression_level = compression_level
        super().__init__(path, default_value)

    def _serialize(self, data):
        """Serialize and compress data"""
        return zstd.compress(pickle.dumps(data), self.compression_level)

    def _deserialize(self, data):
        """Decompress and deserialize data"""
        try:
            return pickle.loads(zstd.decompress(data))
        except zstd.Error as exc:
            raise pickle.UnpicklingError(str(exc)) from exc
