"""Minimal OpenML client: resolve a dataset's ARFF URL and cache the download."""
from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from pathlib import Path
from typing import Callable, Protocol

from filelock import FileLock

log = logging.getLogger(__name__)

API = "https://www.openml.org/api/v1/json/data/{id}"
TIMEOUT = 60.0
RETRIES = 3


class FetchError(RuntimeError):
    pass


class NotFoundError(FetchError):
    pass


class HTTPStatusError(FetchError):
    def __init__(self, url: str, status: int):
        super().__init__(f"HTTP {status} for {url}")
        self.status = status


class Transport(Protocol):
    def get(self, url: str, timeout: float) -> bytes: ...


class UrllibTransport:
    def get(self, url: str, timeout: float) -> bytes:
        try:
            with urllib.request.urlopen(url, timeout=timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            raise HTTPStatusError(url, exc.code) from None
        except (urllib.error.URLError, OSError) as exc:
            raise FetchError(f"{url}: {exc}") from None


def default_cache_dir() -> Path:
    """``$AEWB_CACHE`` if set, else ``~/.cache/aewb``."""
    env = os.environ.get("AEWB_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "aewb"


def cache_path(cache_dir, dataset_id: int) -> Path:
    return Path(cache_dir) / "openml" / f"{dataset_id}.arff"


def _get(transport: Transport, url: str, retries: int, timeout: float, backoff: float,
         sleep: Callable[[float], None]) -> bytes:
    for attempt in range(retries + 1):
        try:
            return transport.get(url, timeout)
        except HTTPStatusError as exc:
            if exc.status == 404:
                raise NotFoundError(f"not found: {url}") from None
            err = exc
        except FetchError as exc:
            err = exc
        if attempt < retries:
            wait = backoff * 2 ** attempt
            log.warning("fetch failed (%s); retrying in %.1fs", err, wait)
            sleep(wait)
    raise FetchError(f"giving up on {url} after {retries + 1} attempts: {err}")


def fetch_openml(dataset_id: int, cache_dir, transport: Transport | None = None,
                 retries: int = RETRIES, timeout: float = TIMEOUT, backoff: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep) -> bytes:
    """ARFF bytes for an OpenML dataset id, served from ``<cache>/openml/<id>.arff`` when warm."""
    if not isinstance(dataset_id, int) or dataset_id <= 0:
        raise NotFoundError(f"invalid OpenML dataset id {dataset_id!r}")
    path = cache_path(cache_dir, dataset_id)
    if path.exists():
        return path.read_bytes()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FetchError(f"cannot create cache directory: {exc}") from None
    transport = transport or UrllibTransport()
    with FileLock(str(path) + ".lock"):
        if path.exists():  # another process finished the download
            return path.read_bytes()
        meta = _get(transport, API.format(id=dataset_id), retries, timeout, backoff, sleep)
        try:
            url = json.loads(meta)["data_set_description"]["url"]
        except (ValueError, KeyError, TypeError):
            raise NotFoundError(f"dataset {dataset_id}: no download URL in description") from None
        body = _get(transport, url, retries, timeout, backoff, sleep)
        tmp = path.with_suffix(".part")
        try:
            tmp.write_bytes(body)
            tmp.replace(path)
        except OSError as exc:
            raise FetchError(f"cache write failed: {exc}") from None
    return body
