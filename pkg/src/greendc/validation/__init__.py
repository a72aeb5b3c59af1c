from .reference import reference_mills_tail, reference_alpha, reference_rho, reference_loss, reference_queue_profit, \
    reference_slot_profit
from .monte_carlo import McConfig, QueueState, McResult, mc_loss, fit_moving_average, spread_arrivals, BatteryCell, \
    run_battery_cell, LossBattery, BatteryReport, loss_battery
from .brute_force import BruteForceGrid, BruteForceResult, brute_force_solve
from .convexity_audit import AuditGrid, AuditCheck, AuditReport, convexity_audit, DEFAULT_TOLERANCES
