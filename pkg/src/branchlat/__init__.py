"""Transport on load-bearing branching hierarchical lattices.

Lattice families (base, V, perturbed V), weight-transmission avalanches,
packet percolation with explosive-jump analysis, and the fitting utilities
and reproducible ensemble machinery around them.
"""

from .lattice import (CapacityField, ClusterLabeling, ConfigurationError,
                      Lattice, LatticeSpec, Trunk, annotate_lattice,
                      build_lattice, compute_capacities, find_trunk,
                      generate_base, generate_v, label_clusters, perturb_v,
                      serialize_lattice, trunk_capacity)
from .avalanche import (AvalancheConfig, AvalancheOutcome, AvalancheSamples,
                        avalanche_ensemble, run_avalanche)
from .percolation import (FillTrajectory, JumpRecord, OccupancyState,
                          SweepResult, density_sweep, fill_trajectory,
                          jump_scaling, largest_jump, order_parameter)
from .statsfit import (GaussianFit, Histogram, PowerLawFit, SizeScalingFit,
                       fit_gaussian, fit_power_law, fit_size_scaling,
                       histogram, scan_power_law, small_t_fits)
from .ensemble import (ExperimentConfig, ResultSet, parse_config_text,
                       read_config, read_results, run_experiment, seed_stream,
                       write_results)

__version__ = "0.1.0"
