import hashlib
import os

import pandas as pd

from src.config import LOGGER

INDEX_COLUMNS = ["name", "path", "bytes", "sha256"]


class DataStore:
    """
    Destination for run artifacts (reports, traces, tables).
    """

    def __init__(self, base_dir: str) -> None:
        self._base_dir = base_dir

    def store(self, name: str, payload: bytes) -> str:
        raise NotImplementedError

    def digest(self, name: str):
        raise NotImplementedError


class FileBasedStore(DataStore):
    """
    Writes artifacts to disk and keeps an index CSV with their sizes and
    sha256 digests, so two runs can be compared without rereading traces.
    Bare names land in ``base_dir``; paths with a directory are kept as given.
    """

    def __init__(self, base_dir: str, index_file: str = "artifacts.csv") -> None:
        super().__init__(base_dir)
        self.index_file = os.path.join(base_dir, index_file)
        os.makedirs(base_dir, exist_ok=True)

        if not os.path.exists(self.index_file):
            pd.DataFrame(columns=INDEX_COLUMNS).to_csv(self.index_file, index=False)

    def _path(self, name: str) -> str:
        if os.path.dirname(name):
            return name
        return os.path.join(self._base_dir, name)

    def store(self, name: str, payload: bytes) -> str:
        path = self._path(name)
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(payload)

        index = self._read_index()
        # Rewriting an artifact replaces its index row.
        index = index[index["name"] != name]
        row = pd.DataFrame(
            {
                "name": [name],
                "path": [path],
                "bytes": [len(payload)],
                "sha256": [hashlib.sha256(payload).hexdigest()],
            }
        )
        index = pd.concat([index, row], ignore_index=True)
        index.to_csv(self.index_file, index=False)
        LOGGER.info("Wrote %s (%d bytes)", path, len(payload))
        return path

    def digest(self, name: str):
        rows = self._read_index()
        rows = rows[rows["name"] == name]
        if rows.empty:
            return None
        return rows["sha256"].values[0]

    def _read_index(self) -> pd.DataFrame:
        if not os.path.exists(self.index_file):
            return pd.DataFrame(columns=INDEX_COLUMNS)
        return pd.read_csv(self.index_file, dtype={"name": str, "path": str, "sha256": str})
