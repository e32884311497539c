from importlib.metadata import PackageNotFoundError, version

try:
    # Change here if project is renamed and does not equal the package name
    dist_name = __name__
    __version__ = version(dist_name)
except PackageNotFoundError:  # pragma: no cover
    __version__ = "unknown"
finally:
    del version, PackageNotFoundError


class GeofeedkitError(Exception):
    """
    Base class of every exception raised by ``geofeedkit``.

    The command line maps these to exit code ``2`` unless a subclass sets
    :py:attr:`exit_code` to something else.
    """

    exit_code = 2
