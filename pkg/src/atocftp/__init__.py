"""Perfect sampling for assemble-to-order systems by coupling from the past."""

from .errors import ATOError, ConfigError, ModelError, SizeError
from .events import EventAlphabet, EventKind, EventLabel, EventStream, mix_seed
from .lattice import Interval
from .individual import (
    IndividualModel, bound_pos_coupling, bound_tos_coupling, build_model, envelope_tos,
    step_pos, step_tos,
)
from .joint import (
    JointModel, StateN, agg_envelope, bound_algo4, bound_hsr, best_algo4_bound,
    build_joint_model, inf_step, project, step_n, sup_step,
)
from .cftp import (
    Outcome, SamplerReport, aepsa, aepsa_componentwise, aggregate_subset_cftp, batch_reports,
    epsa, exact_joint_sample, psa_monotone, sample_batch, truncated_interval_estimate,
)

__version__ = "0.1.0"
