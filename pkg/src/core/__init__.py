from .grid import GridFunction, GridGeometry, GridSet, IncidencePoint, SpacePoint
from .transform import QuadratureSpec, bilinear, evaluate_T, score
from .balls import BallParams, envelope, make_ball, unit_ball, verify_quasiextremal
from .symmetries import SymmetryElement, apply_ball, apply_points
from .covering import cover
from .tower import build_three_step_tower, build_tower
from .slicing import slicing_bound
from .convexify import convexify
from .det_moment import det_moment
from .extraction import extract_ball

__all__ = [
    'GridFunction',
    'GridGeometry',
    'GridSet',
    'IncidencePoint',
    'SpacePoint',
    'QuadratureSpec',
    'bilinear',
    'evaluate_T',
    'score',
    'BallParams',
    'envelope',
    'make_ball',
    'unit_ball',
    'verify_quasiextremal',
    'SymmetryElement',
    'apply_ball',
    'apply_points',
    'cover',
    'build_tower',
    'build_three_step_tower',
    'slicing_bound',
    'convexify',
    'det_moment',
    'extract_ball'
]
