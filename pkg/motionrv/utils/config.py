import os
from pathlib import Path
from typing import Any

import yaml

from motionrv.constants import CONFIG_FILENAME, ENV_CONFIG_PATH
from motionrv.utils.io import find_in_parent_folders, find_in_subfolders


def load_yaml_config(path: Path) -> dict[str, Any]:
    """Load one YAML config file.

    Returns:
        Mapping of config keys; an empty file gives an empty mapping.

    Raises:
        ValueError: The file cannot be read, is not valid YAML, or its top
            level is not a mapping.
    """
    try:
        with open(path) as file:
            config_data = yaml.safe_load(file)
    except (yaml.YAMLError, OSError) as e:
        raise ValueError(f"Error reading config file {path}: {e}")
    if config_data is None:
        return {}
    if not isinstance(config_data, dict):
        raise ValueError(f"Error reading config file {path}: "
                         f"top level must be a mapping")
    return config_data


def find_motionrv_config(
        explicit_path: str | Path | None = None,
        start_path: Path | None = None) -> dict[str, Any] | None:
    """Find and load the motionrv YAML configuration.

    Search order: ``explicit_path``, the path named by the
    ``MOTIONRV_CONFIG`` environment variable, then ``.motionrv-config.yaml``
    in the working directory, up to 4 subdirectory levels and up to 4
    parent levels.

    Returns:
        Dictionary containing the configuration, or None if no file found.
    """
    if explicit_path is not None:
        return load_yaml_config(Path(explicit_path))

    env_path = os.getenv(ENV_CONFIG_PATH)
    if env_path:
        return load_yaml_config(Path(env_path))

    current_path = start_path or Path.cwd()
    config_path = current_path / CONFIG_FILENAME
    if config_path.exists():
        return load_yaml_config(config_path)

    for config_path in find_in_subfolders(CONFIG_FILENAME, 4, current_path):
        return load_yaml_config(config_path)

    for config_path in find_in_parent_folders(CONFIG_FILENAME, 4,
                                              current_path):
        return load_yaml_config(config_path)
    return None
