"""Content-addressed stage cache and the per-output-directory run lock.

A stage key is the sha1 of the stage name, its config as canonical JSON and
the content hashes of its inputs, so experiment variants that share a
prefix of the pipeline reuse the same artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import time
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
from pydantic import BaseModel

from clwe_runtime.errors import LockHeld
from models import Corpus, EmbeddingMatrix

logger = logging.getLogger(__name__)

_DONE = ".done"
LOCK_NAME = "run.lock"


def hash_text(text: str) -> str:
    return hashlib.sha1(text.encode("utf-8")).hexdigest()


def hash_corpus(corpus: Corpus) -> str:
    digest = hashlib.sha1(corpus.language_tag.encode("utf-8"))
    for sentence in corpus.sentences:
        digest.update(("\n" + " ".join(sentence)).encode("utf-8"))
    return digest.hexdigest()


def hash_array(array: np.ndarray) -> str:
    a = np.ascontiguousarray(array, dtype=np.float64)
    digest = hashlib.sha1(str(a.shape).encode("utf-8"))
    digest.update(a.tobytes())
    return digest.hexdigest()


def hash_embeddings(emb: EmbeddingMatrix) -> str:
    digest = hashlib.sha1("\n".join(emb.vocab.words).encode("utf-8"))
    digest.update(hash_array(emb.matrix).encode("utf-8"))
    return digest.hexdigest()


def _canonical(config: Any) -> str:
    if isinstance(config, BaseModel):
        config = config.model_dump(mode="json")
    return json.dumps(config, sort_keys=True, default=str)


class StageCache:
    def __init__(self, root: str | Path, enabled: bool = True):
        self.root = Path(root)
        self.enabled = enabled

    def key(self, stage: str, config: Any, inputs: Iterable[str] = ()) -> str:
        # one field per line; input hashes never contain a newline
        return hash_text("\n".join([stage, _canonical(config), *inputs]))

    def path(self, stage: str, key: str) -> Path:
        return self.root / f"{stage}-{key[:16]}"

    def lookup(self, stage: str, key: str) -> Optional[Path]:
        """Directory of a completed entry, or None."""
        if not self.enabled:
            return None
        p = self.path(stage, key)
        if (p / _DONE).exists():
            logger.info(f"Stage '{stage}' served from cache ({p.name})")
            return p
        return None

    def begin(self, stage: str, key: str) -> Path:
        p = self.path(stage, key)
        if p.exists():
            shutil.rmtree(p)
        p.mkdir(parents=True)
        return p

    def commit(self, entry: Path) -> None:
        if self.enabled:
            (entry / _DONE).write_text(f"{int(time.time())}\n")


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    except OSError:
        return False
    return True


class RunLock:
    """PID lockfile guarding one output directory.

    A lock left behind by a dead process is taken over.
    """

    def __init__(self, out_dir: str | Path):
        self.path = Path(out_dir) / LOCK_NAME
        self._held = False

    def read(self) -> Optional[int]:
        if not self.path.exists():
            return None
        try:
            return int(self.path.read_text().strip().splitlines()[0])
        except (ValueError, IndexError):
            return None

    def acquire(self) -> "RunLock":
        pid = self.read()
        if pid is not None and pid != os.getpid() and _pid_alive(pid):
            raise LockHeld(f"{self.path.parent} is in use by pid={pid}")
        if pid is not None and pid != os.getpid():
            logger.warning(f"Removing stale lock of pid={pid}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(f"{os.getpid()}\n{int(time.time())}\n")
        self._held = True
        return self

    def release(self) -> None:
        if self._held and self.read() == os.getpid():
            self.path.unlink()
        self._held = False

    def __enter__(self) -> "RunLock":
        return self.acquire()

    def __exit__(self, *exc) -> None:
        self.release()
