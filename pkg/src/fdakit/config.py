"""Pipeline configuration: line-oriented key=value files with section headers.

The format is plain INI (configparser), which keeps reproducibility records
trivially diffable. Flags mirror config keys; a flag given on the command
line overrides the file value.
"""

import configparser
from pathlib import Path

#: Env var naming the default config file.
CONFIG_ENV_VAR = "FDAKIT_CONFIG"

SECTIONS = ("paths", "fda", "fog", "rain", "augment", "dataset", "ssl", "run")


def load_config(path) -> dict:
    """Read a config file into {section: {key: raw string value}}."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    return {section: dict(parser.items(section)) for section in parser.sections()}


def section_defaults(config: dict, section: str, casts: dict) -> dict:
    """Typed defaults for one section; `casts` maps key -> conversion."""
    out = {}
    for key, value in config.get(section, {}).items():
        if key in casts:
            out[key] = casts[key](value)
    return out


def format_run_record(version: str, argv, settings: dict) -> str:
    """Reproducibility record: toolkit version, exact argv, resolved settings."""
    lines = ["[run]", f"version = {version}", f"argv = {' '.join(argv)}"]
    for key in sorted(settings):
        lines.append(f"{key} = {settings[key]}")
    return "".join(line + "\n" for line in lines)


def write_run_record(out_dir, version: str, argv, settings: dict) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_record.txt").write_text(format_run_record(version, argv, settings))
