"""NLP assembly of the multi-conductor and balanced AC/DC OPF."""

from .model import (POLE_FIELDS, Census, VariableMap, build_balanced, build_mcdc,
                    build_single_conductor, census, flat_start, pole_entity)
from .solution import Solution, extract_solution

__all__ = ["POLE_FIELDS", "Census", "Solution", "VariableMap", "build_balanced", "build_mcdc",
           "build_single_conductor", "census", "extract_solution", "flat_start", "pole_entity"]
