"""System identification for the constant-time-headway relative-velocity
car-following model: simulation, three estimators and string stability."""

__version__ = "0.1.0"

from .errors import (CTHRVError, DataError, DegenerateDynamicsError, EstimationError,
                     RankDeficiencyError, TooFewSamplesError, TrajectoryCollapseError,
                     ValidationError, WeightCollapseError)
from .model import (ModelParams, Stability, StabilityVerdict, StateMatrices, VehicleState,
                    acceleration, build_state_matrices, params_from_matrices, string_stability)
from .trajectory import (SensorComparison, Trajectory, TrajectoryFormat, compare_sensors,
                         emit_trajectory, load_trajectory, resample_uniform)
from .simulate import (LeadProfileSpec, PlatoonResult, generate_lead_profile, simulate_follower,
                       simulate_platoon)
from .least_squares import DataMatrices, assemble_matrices, fit_least_squares
from .batch import BatchConfig, BatchResult, fit_batch, rmse_spacing
from .particle_filter import (PFConfig, PFResult, ParticleEnsemble, ParticleFilter,
                              fit_particle_filter, pf_predict, pf_update, systematic_resample)
from .metrics import FitReport, fit_report, mae, rmse
