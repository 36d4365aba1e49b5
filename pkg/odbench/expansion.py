import json
import os
from pathlib import Path
from typing import Any, Mapping, Optional, Text

import _jsonnet
import jsonmerge
import yaml
from dotenv import dotenv_values, load_dotenv
from dotenv.variables import parse_variables
from yamlinclude import YamlIncludeConstructor


def expand_posix_vars(obj: Any, variables: Mapping[Text, Optional[Any]]) -> Any:
    """expand_posix_vars recursively expands POSIX values in an object.

    Args:
        obj (any): object in which to interpolate variables.
        variables (dict): dictionary that maps variable names to their value
    """
    if isinstance(obj, dict):
        for key, val in obj.items():
            obj[key] = expand_posix_vars(val, variables)
    elif isinstance(obj, list):
        for index in range(len(obj)):
            obj[index] = expand_posix_vars(obj[index], variables)
    elif isinstance(obj, str):
        obj = _expand(obj, variables)
    return obj


def _expand(value, variables):
    """_expand does POSIX-style variable expansion

    python-dotenv only expands against os.environ, this variant takes the
    variables explicitly so a dotenv file can be layered on top.
    """
    atoms = parse_variables(value)
    return "".join([str(atom.resolve(variables)) for atom in atoms])


def expand(config, dotenv, path):
    """
    interpolate ${VAR} from the environment plus an optional dotenv file; the
    file comes from the `dotenv` argument, else from a `dotenv` key of a
    mapping config, relative to the config file
    """
    config_vars = dict(os.environ)

    if isinstance(config, dict):
        if dotenv is not None:
            config.pop("dotenv", None)
        else:
            dotenv = config.pop("dotenv", None)

    if dotenv:
        if not isinstance(dotenv, str):
            raise ValueError(f"Invalid value passed to dotenv: {dotenv}")
        env_path = path.parent / dotenv
        if not env_path.is_file():
            raise ValueError(
                f"Dotenv specified in config but not found at path: {env_path}"
            )
        config_vars.update(dotenv_values(dotenv_path=env_path))  # type: ignore
        load_dotenv(dotenv_path=env_path)

    return expand_posix_vars(config, config_vars)


def expand_yaml(config_path, dotenv):
    path = Path(config_path)
    YamlIncludeConstructor.add_to_loader_class(
        loader_class=yaml.FullLoader,
        base_dir=path.parent,
    )

    with open(path) as f:
        config = yaml.load(f, Loader=yaml.FullLoader)

    if isinstance(config, dict):
        include = config.pop("include", {})
        if include:
            config = jsonmerge.merge(include, config)

    return expand(config, dotenv, path)


def expand_jsonnet(config_path, dotenv):
    path = Path(config_path)
    config = json.loads(_jsonnet.evaluate_file(str(config_path)))
    return expand(config, dotenv, path)


def expand_json(config_path, dotenv):
    path = Path(config_path)
    config = json.loads(path.read_text())
    return expand(config, dotenv, path)


EXPANDERS = {
    ".yaml": expand_yaml,
    ".yml": expand_yaml,
    ".jsonnet": expand_jsonnet,
    ".json": expand_json,
}


def expand_config(config_path, dotenv=None):
    "load a yaml, jsonnet or json file, picked by suffix, and expand it"
    path = Path(config_path)
    if not path.is_file():
        raise ValueError(f"config file not found: {path}")
    try:
        expander = EXPANDERS[path.suffix]
    except KeyError:
        raise ValueError(
            f"unsupported config format {path.suffix!r}, "
            f"expected one of {', '.join(EXPANDERS)}"
        )
    return expander(path, dotenv)
