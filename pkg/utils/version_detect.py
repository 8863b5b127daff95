"""Library version detection for run manifests.

Collects the versions of the numerical stack once per process so that every
manifest written in a run records the same values.
"""

import platform
from importlib import metadata

__all__ = [
    "TRACKED_PACKAGES",
    "get_versions",
    "get_version",
    "reset_cache",
]

TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "PyYAML", "click", "Flask")

_cached_versions: dict[str, str] | None = None


def _detect() -> None:
    """Populate the module-level cache.

    Packages that are not installed are recorded as ``"missing"`` rather than
    raising, so a manifest can still be written.
    """
    global _cached_versions

    versions = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "missing"
    _cached_versions = versions


def get_versions() -> dict[str, str]:
    """Return ``{package: version}`` for Python and the tracked packages.

    A *copy* of the cached mapping is returned so callers cannot mutate the cache.
    """
    if _cached_versions is None:
        _detect()
    return dict(_cached_versions)  # type: ignore[arg-type]


def get_version(name: str) -> str:
    """Return one tracked version string.

    Raises:
        KeyError: If ``name`` is not tracked.
    """
    return get_versions()[name]


def reset_cache() -> None:
    """Reset the in-memory detection cache.

    Useful in tests to force re-detection.
    """
    global _cached_versions
    _cached_versions = None
