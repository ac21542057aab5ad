"""The object modelling language: parser, validator and interpreter."""

from .ast import Program
from .interp import (Bounds, BoundsError, Config, Machine, ModelError, NullDereference,
                     PoolExhausted, ThreadState, init_config, step)
from .parser import ModelSyntaxError, parse
from .validate import Issue, ModelValidationError, load_program, validate

__all__ = [
    "Bounds", "BoundsError", "Config", "Issue", "Machine", "ModelError",
    "ModelSyntaxError", "ModelValidationError", "NullDereference", "PoolExhausted",
    "Program", "ThreadState", "init_config", "load_program", "parse", "step", "validate",
]
