"""Quantitative kinematics from noisy, blurred radiographic image sequences.

Core pipeline: heat-based denoising -> threshold + one-pixel erosion
contour detection -> surface profiles -> per-column velocity fields and
apex velocity -> feature fusion against point-velocimetry records. A
synthetic phantom generator with exact ground truth serves as the
verification oracle.
"""

from .imagecore import (BinaryImage, GrayImage, PhysPoint, PixelCoord,
                        crop_roi, load_gray, save_gray, save_mask, to_physical)
from .denoise import adaptive_diffusivity, diffuse, heat_denoise
from .contour import (Contour, ContourMask, binarize, erode_once,
                      one_bit_erosion, select_component, threshold_sweep,
                      trace_boundary)
from .kinematics import (CurvatureFit, SurfaceProfile, VelocityField,
                         apex_velocity, curvature_fit, surface_profile,
                         velocity_field)
from .visar import (FeatureSet, VisarSeries, compare_prad_visar,
                    extract_features, first_fluctuation_time, load_visar,
                    noise_rms, plateau_mean, resample_linear)
from .fusion import (ExperimentRecord, FeatureTable, build_record,
                     feature_table, interpolate_missing, trend_report)
from .phantom import (GroundTruth, PhantomSpec, generate_sequence,
                      generate_visar, render_frame)
from .errors import ConfigError, DataError, DegenerateFitError, RadkinError

__version__ = "0.1.0"
