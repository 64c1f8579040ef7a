"""twistlab: numerical laboratory for twisting diagnostics of 2D flows.

Flows near shearing steady states wind material around the domain; this
package evolves the flows (pseudospectral active scalars, contour
dynamics for patches), lifts trajectories and boundaries to universal
covers, and checks every stability inequality the twisting theory
states: winding-functional remainder bounds, twist defects, streamline
migration, aging floors, perimeter growth, and the spiral length floor.
"""

__version__ = "0.1.0"

from ._core import backend_name
from .action_angle import (AnalyticStream, build_action_angle_chart,
                           radial_stream, shear_stream, travel_time)
from .diagnostics import (DiagnosticSeries, age_lower_bound,
                          angular_twist_defect, arnold_diffusion_q,
                          level_set_intersections, lifted_diameter,
                          remainder_check, twist_defect, wandering_gap,
                          winding_functional)
from .domains import (CoverPoint, DomainSpec, annulus, channel,
                      cover_polyline_length, lift_trajectory,
                      punctured_plane, torus, winding_number)
from .interp import (AnalyticVelocity, RadialFlow, SnapshotVelocity,
                     SteadyShear, build_tables)
from .patch_dynamics import (PatchEvolver, contour_velocity_at,
                             disc_stability_bound, spiral_length_floor,
                             symmetric_difference_area, velocity_decay_check,
                             winding_extremes)
from .patch_geometry import (Contour, PatchRecipe, PatchState,
                             build_initial_patch, disc_patch)
from .profiles import WeightProfile
from .spectral import (ActiveScalarSolver, AlphaModel, GridSpec, StreamField,
                       VorticityField, energy, enstrophy, grad_l1,
                       invert_biot_savart, sqg_invariants, step_active_scalar,
                       stream_distance_2, stream_distance_A)
from .transport import (ParticleEnsemble, advect, evolve_marker_curve,
                        flow_gradient_l1, jacobian_probe, seed_midpoint_grid)

__all__ = [name for name in dir() if not name.startswith("_")]
