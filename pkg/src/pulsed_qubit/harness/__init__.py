"""Configuration, persistence and the command-line interface."""
from .config import RunConfig, UNITS_NOTE, load, loads, parse_config
from .cli import cmd_atlas, cmd_classify, cmd_compare, cmd_evolve, main

__all__ = ["RunConfig", "UNITS_NOTE", "load", "loads", "parse_config",
           "cmd_atlas", "cmd_classify", "cmd_compare", "cmd_evolve", "main"]
