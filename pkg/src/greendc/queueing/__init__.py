from .types import WorkloadStats, QueueSpec, SearchConfig, LossResult, LossShape, ARGMIN_AT_INFINITY
from .loss import mills_tail, mills_complement, mills_tail_bounds, alpha_normalized, alpha_bounds, \
    alpha_derivatives, alpha_raw, rho_sequence, loss_shape, exponent_m, exponent_sequence, exponent_derivatives, \
    loss_from_ratio, loss_probability, loss_terms, loss_curvature, term_curvature, g_second_derivative, \
    g_second_derivative_closed_form
from .mm1 import mm1_deadline_tail
