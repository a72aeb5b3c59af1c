from .metadata import (
    __author__,
    __description__,
    __email__,
    __license__,
    __name__,
    __url__,
    __version__,
)

from . import basic_typing
from . import utils
from . import allocation
from . import queueing
from . import energy
from . import optim
from . import simulation
from . import validation
from . import reporting
from . import cli
