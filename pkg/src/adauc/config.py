"""Flat ``key = value`` config files, layered settings, and atomic file output."""

import os
import tempfile


class ConfigError(ValueError):
    pass


def parse_config_text(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def load_config_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), str(path))


def layered(defaults, file_values, flag_values):
    """defaults < config file < command-line flags (flags left as None are unset)."""
    merged = dict(defaults)
    for key, value in file_values.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    for key, value in flag_values.items():
        if value is not None:
            merged[key] = value
    return merged


def header_lines(config, prefix="# "):
    return [f"{prefix}{k} = {config[k]}" for k in sorted(config)]


def atomic_write_bytes(path, data):
    """Write to a sibling temp file, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))
