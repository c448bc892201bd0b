from .logger import Logger
from .async_utils import gather_bounded, map_bounded
from .rng import stream

__all__ = ['Logger', 'gather_bounded', 'map_bounded', 'stream']
