from .options import recursive_dict_update, flatten_nested_dictionaries
from .files import safe_filename, atomic_write
from .runtime_formatter import RuntimeFormatter, configure_logging
