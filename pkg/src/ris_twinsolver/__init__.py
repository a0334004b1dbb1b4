"""Dual-engine simulator for RIS-assisted links.

Two ways to get the system impedance matrix of a set of parallel thin-wire
dipoles (induced-EMF closed forms, or a PEEC full-wave circuit), the
end-to-end multiport channel built on it, and a coordinate-ascent optimizer
for the RIS terminations.
"""
from .analytical import (QuadratureSpec, SinusoidalCurrent, assemble_zsys_analytical,
                         impedance_matrix, mutual_impedance, sinusoidal_current)
from .channel import (ChannelResult, Engine, ZtgForm, channel_gain_db, end_to_end_channel,
                      scattering_inverse)
from .config import (RunConfig, dump_scenario, load_run_config, load_scenario,
                     read_run_config, read_scenario)
from .core import (BlockImpedanceMatrix, Dipole, FreeSpaceParams, Role, Scenario,
                   build_reference_scenario, free_space_params)
from .exceptions import (ConditioningError, ConfigError, DomainError, GeometryError,
                         SingularLengthError, SingularUpdateError, StructuralError,
                         TwinSolverError)
from .optimizer import (Constraint, CoordinateOrder, OptimizerConfig, OptimizerState,
                        coordinate_objective, optimize_coordinate, optimize_ris,
                        optimize_terminations, sherman_morrison_update)
from .peec import (MeshConfig, PeecMesh, assemble_mna, assemble_partial_elements,
                   extract_zsys_peec, input_impedance, mesh_dipole, solve_mna)
from .runner import ExperimentSpec, ValidationReport, emit_plot_data, run_experiment

__version__ = "0.1.0"

__all__ = [
    "BlockImpedanceMatrix", "ChannelResult", "ConditioningError", "ConfigError", "Constraint",
    "CoordinateOrder", "Dipole", "DomainError", "Engine", "ExperimentSpec", "FreeSpaceParams",
    "GeometryError", "MeshConfig", "OptimizerConfig", "OptimizerState", "PeecMesh",
    "QuadratureSpec", "Role", "RunConfig", "Scenario", "SingularLengthError",
    "SingularUpdateError", "SinusoidalCurrent", "StructuralError", "TwinSolverError",
    "ValidationReport", "ZtgForm", "assemble_mna", "assemble_partial_elements",
    "assemble_zsys_analytical", "build_reference_scenario", "channel_gain_db", "coordinate_objective",
    "dump_scenario", "emit_plot_data", "end_to_end_channel", "extract_zsys_peec",
    "free_space_params", "impedance_matrix", "input_impedance", "load_run_config",
    "load_scenario", "mesh_dipole", "mutual_impedance", "optimize_coordinate", "optimize_ris",
    "optimize_terminations", "read_run_config", "read_scenario", "run_experiment",
    "scattering_inverse", "sherman_morrison_update", "sinusoidal_current", "solve_mna",
]
