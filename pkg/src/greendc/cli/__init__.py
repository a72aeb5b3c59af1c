from .errors import GreenDcError, UsageError, ConfigError, TraceError, ValidationFailure, EXIT_OK, \
    EXIT_RUNTIME_FAILURE, EXIT_USAGE_ERROR, EXIT_VALIDATION_FAILURE
from .trace_io import load_traces, load_trace_frames, check_trace_columns, write_traces, traces_frame, \
    required_columns, TIMESTAMP, GREEN_PREFIX, PRICE_PREFIX, RATE_PREFIX, RATE_STD_PREFIX
from .config import RunConfig, load_config, read_options, merge_options, config_from_options, \
    create_default_options, default_config, SCHEMA_VERSION, OUTPUT_ROOT_VARIABLE
from .main import main, create_parser, execute, DIAGNOSTICS_NAME
