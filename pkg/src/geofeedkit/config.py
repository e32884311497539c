"""
Configuration of the ``geofeedkit`` command.

Settings come from three places, later ones override earlier ones:

1. a flat YAML file whose keys are long flag names (``retry-limit: 3``),
   given with ``--config`` or ``GEOFEEDKIT_CONFIG``;
2. environment variables ``GEOFEEDKIT_<FLAG>``, upper case with dashes
   replaced by underscores (``GEOFEEDKIT_RETRY_LIMIT=3``);
3. command line flags.

The command line leaves unset flags at ``None`` so they don't shadow the
other sources. Settings missing everywhere fall back to the library
defaults.
"""

import os
import logging

import yaml

from . import GeofeedkitError
from .logger import NamedLogger

log = NamedLogger(logging.getLogger(__name__), {"name": "CONFIG"})

ENV_PREFIX = "GEOFEEDKIT_"
CONFIG_ENV = ENV_PREFIX + "CONFIG"

# keys that may appear in the configuration file and the environment
CONFIG_KEYS = (
    "timeout",
    "retry-limit",
    "redirect-limit",
    "max-body",
    "parallelism",
    "allow-insecure",
    "host-concurrency",
    "host-delay",
    "subdivisions",
    "country-min-share",
    "v6-multiple-of-4",
    "as-info-endpoint",
    "as-info-token",
    "ownership-endpoint",
)


class ConfigError(GeofeedkitError):
    """
    Raised when the configuration file can't be used.
    """


def dest(key):
    """
    :return: the ``argparse`` destination of a flag name, ``retry-limit`` → ``retry_limit``
    """
    return key.replace("-", "_")


def env_name(key):
    return ENV_PREFIX + dest(key).upper()


def load_config_file(path):
    """
    :param str path: a YAML file with a flat mapping
    :return: the known settings, keyed by destination name
    :rtype: dict
    :raise ConfigError: when the file can't be read or isn't a mapping
    """
    try:
        with open(path, encoding="utf-8") as fp:
            data = yaml.safe_load(fp)
    except OSError as e:
        raise ConfigError(f"can't read config file {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid config file {path}: {e}") from None

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: the configuration must be a mapping")

    known = {dest(k) for k in CONFIG_KEYS}
    values = {}
    for key, value in data.items():
        name = dest(str(key))
        if name not in known:
            log.warning("Ignoring unknown configuration key %r in %s", key, path)
            continue
        values[name] = value
    return values


def env_values(environ=None):
    """
    :param dict environ: the environment, ``os.environ`` by default
    :return: the settings found in the environment, keyed by destination name
    :rtype: dict
    """
    environ = os.environ if environ is None else environ
    return {dest(k): environ[env_name(k)] for k in CONFIG_KEYS if env_name(k) in environ}


def resolve(args, environ=None):
    """
    Merges configuration file, environment and command line.

    :param argparse.Namespace args: the parsed command line
    :param dict environ: the environment, ``os.environ`` by default
    :return: the effective settings, keyed by destination name; settings
        set nowhere are absent
    :rtype: dict
    """
    environ = os.environ if environ is None else environ
    path = getattr(args, "config", None) or environ.get(CONFIG_ENV)

    settings = {}
    if path:
        log.debug("Reading configuration from %s", path)
        settings.update(load_config_file(path))
    settings.update(env_values(environ))

    for key in CONFIG_KEYS:
        value = getattr(args, dest(key), None)
        if value is not None:
            settings[dest(key)] = value

    return settings


def as_bool(value):
    """
    :param value: a ``bool`` or one of ``1 true yes on 0 false no off``, any case
    :rtype: bool
    :raise ValueError: for anything else
    """
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(value)
