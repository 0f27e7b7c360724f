"""Bulk-surface Navier-Stokes-Cahn-Hilliard solver on a periodic channel."""
from .geometry import Grid, build_grid, Wall, FaceField
from .model import PhysParams, validate_params
from .potentials import PotentialSpec, PotentialKind
from .coupled import State, VariantConfig, Variant, InitialSpec, initial_conditions, run, step

__version__ = "0.1.0"
