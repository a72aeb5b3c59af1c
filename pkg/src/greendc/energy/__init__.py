from .types import ServiceClass, DataCenterSpec, SlotEnvironment, check_network_delays
from .power import total_power, queue_power, green_power, server_usage, energy_kwh, base_power_per_server, \
    proportional_power_per_server, SECONDS_PER_HOUR
from .profit import class_revenue, slot_profit, queue_losses, ProfitBreakdown, profitability_check, \
    profitability_margins, failing_pairs, LOSS_MODEL_GD1, LOSS_MODEL_MM1, LOSS_MODELS
