"""maskmeasure: dimensional measurement and grasp ranking from a binary
object mask, an aligned depth map, and camera intrinsics."""

from .errors import (BadDepthError, ConfigError, DegenerateMaskError,
                     DegenerateSlopeError, DimensionMismatchError,
                     EmptyMaskError, NoConvergenceError, NoPathError,
                     NoStationDepthError, NoValidSegmentsError, OutOfViewError,
                     PipelineError, StageError, TooFewStationsError)
from .grasp import (GraspCandidate, GraspWeights, center_of_gravity,
                    concavity_condition, stability_scores, top_k)
from .mask_ops import (MaskConfig, largest_component, open_close,
                       polygonal_refine, refine, remove_small_objects)
from .pipeline import PipelineResult, RunConfig, run_grasp, run_measure
from .project import (CameraIntrinsics, MeasurementReport, build_report,
                      deproject, diameters, length, project_point, volume)
from .segments import (SamplingConfig, StationSegment, extract_segments,
                       line_depth, local_slope, sample_stations)
from .skeleton import (AxisSelection, Skeleton, TopologyPoints, augment,
                       classify_points, cluster_intersections,
                       construct_general, construct_rod, medial_axis, prune,
                       select_axis, trunk_path)
from .synth import (GroundTruth, RevolutionProfile, bottle_profile,
                    cylinder_profile, frustum_volume, perturb, render)

__version__ = "0.1.0"
