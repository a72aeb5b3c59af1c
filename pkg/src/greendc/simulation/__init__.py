from .traces import TraceSet, TraceSpec, DcTraceSpec, ClassTraceSpec, estimate_stats, coarse_stats, synth_traces, \
    hourly_profiles, MIN_CLASS_RATE
from .executor import map_jobs
from .baselines import baseline_mm1, baseline_equal_split, equal_split_allocation, normalized_profit_gain, \
    profit_base, profit_max, green_energy_sweep, BASELINE_MM1, BASELINE_EQUAL_SPLIT, BASELINES
from .run import run, solve_slot, allocation_shares, RunOptions, RunSummary, SlotReport, SlotJob, BaselineOutcome, \
    STATUS_ERROR
