"""mmWave MIMO-FMCW hand tracking as a contactless musical instrument."""

__version__ = "0.1.0"

from .signal import (ChirpConfig, ArrayGeometry, PointTarget, BeatFrame,
                     GaussianNoiseSource, FileNoiseSource, default_geometry,
                     simulate_beat, compensate_multistatic,
                     MULTISTATIC, MONOSTATIC, SPEED_OF_LIGHT)
from .imaging import (RoiGrid, RadarImage, ImageRing, RangeMigrationImager,
                      rma_reconstruct, locate_peak, resolution, doppler_velocity,
                      PeakEstimate, DopplerEstimate, export_png, get_imager)
from .enhancer import (LabelParams, FcnnModel, TrainSet, make_label,
                       build_dataset, fcnn_forward, fcnn_train)
from .tracker import (FilterConfig, ParticleSet, ParticleFilter,
                      OscillationTracker, pf_step, dpf_step, doppler_weight,
                      sample_velocity, oscillation_rate)
from .pipeline import VARIANTS, PipelineSettings, TrackingPipeline
from .bench import (MotionProfile, reference_profile, run_variant, run_bench,
                    rmse, measure_latency)
from .service import NoteMap, NoteLane, PlayEvent, Session, SessionManager

__all__ = [
    "ChirpConfig", "ArrayGeometry", "PointTarget", "BeatFrame",
    "GaussianNoiseSource", "FileNoiseSource", "default_geometry",
    "simulate_beat", "compensate_multistatic", "MULTISTATIC", "MONOSTATIC",
    "SPEED_OF_LIGHT",
    "RoiGrid", "RadarImage", "ImageRing", "RangeMigrationImager",
    "rma_reconstruct", "locate_peak", "resolution", "doppler_velocity",
    "PeakEstimate", "DopplerEstimate", "export_png", "get_imager",
    "LabelParams", "FcnnModel", "TrainSet", "make_label", "build_dataset",
    "fcnn_forward", "fcnn_train",
    "FilterConfig", "ParticleSet", "ParticleFilter", "OscillationTracker",
    "pf_step", "dpf_step", "doppler_weight", "sample_velocity",
    "oscillation_rate",
    "VARIANTS", "PipelineSettings", "TrackingPipeline",
    "MotionProfile", "reference_profile", "run_variant", "run_bench", "rmse",
    "measure_latency",
    "NoteMap", "NoteLane", "PlayEvent", "Session", "SessionManager",
]
